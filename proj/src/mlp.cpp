#include "dynrisk/mlp.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <stdexcept>

namespace dynrisk {

namespace {

using MatMap = Eigen::Map<Eigen::MatrixXd>;
using ConstMatMap = Eigen::Map<const Eigen::MatrixXd>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;

double sigmoid(double u) {
  if (u >= 0.0) return 1.0 / (1.0 + std::exp(-u));
  const double e = std::exp(u);
  return e / (1.0 + e);
}

double softplus(double u) { return u > 0.0 ? u + std::log1p(std::exp(-u)) : std::log1p(std::exp(u)); }

double silu(double u) { return u * sigmoid(u); }

double silu_prime(double u) {
  const double s = sigmoid(u);
  return s + u * s * (1.0 - s);
}

}  // namespace

std::string OutputActivation::tag() const {
  switch (kind) {
    case Kind::identity:
      return "identity";
    case Kind::softplus:
      return "softplus";
    case Kind::scaled_sigmoid: {
      char buf[96];
      std::snprintf(buf, sizeof buf, "scaled_sigmoid(%a,%a)", lo, hi);
      return buf;
    }
  }
  return "identity";
}

OutputActivation OutputActivation::from_tag(const std::string& tag) {
  if (tag == "identity") return identity();
  if (tag == "softplus") return softplus();
  if (tag.rfind("scaled_sigmoid(", 0) == 0 && tag.back() == ')') {
    const std::string body = tag.substr(15, tag.size() - 16);
    const auto comma = body.find(',');
    if (comma != std::string::npos) {
      return scaled_sigmoid(std::strtod(body.substr(0, comma).c_str(), nullptr),
                            std::strtod(body.substr(comma + 1).c_str(), nullptr));
    }
  }
  throw std::invalid_argument("unknown output activation tag: " + tag);
}

Mlp::Mlp(std::vector<std::size_t> layer_sizes, OutputActivation output)
    : sizes_(std::move(layer_sizes)), output_(output) {
  if (sizes_.size() < 2) throw std::invalid_argument("Mlp needs at least input and output sizes");
  for (auto n : sizes_) {
    if (n == 0) throw std::invalid_argument("Mlp layer sizes must be positive");
  }
  if (output_.kind == OutputActivation::Kind::scaled_sigmoid && !(output_.lo < output_.hi)) {
    throw std::invalid_argument("scaled_sigmoid needs lo < hi");
  }
  std::size_t total = 0;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    offsets_.push_back(total);
    total += sizes_[l] * sizes_[l + 1] + sizes_[l + 1];
  }
  params_.assign(total, 0.0);
}

void Mlp::init_glorot(Rng& rng) {
  for (std::size_t l = 0; l < num_layers(); ++l) {
    const double limit = std::sqrt(6.0 / static_cast<double>(sizes_[l] + sizes_[l + 1]));
    std::uniform_real_distribution<double> dist(-limit, limit);
    const std::size_t w = weight_offset(l);
    for (std::size_t i = 0; i < sizes_[l] * sizes_[l + 1]; ++i) params_[w + i] = dist(rng.engine());
    const std::size_t b = bias_offset(l);
    for (std::size_t i = 0; i < sizes_[l + 1]; ++i) params_[b + i] = 0.0;
  }
}

void Mlp::set_parameters(std::span<const double> values) {
  if (values.size() != params_.size()) {
    throw std::invalid_argument("parameter vector has " + std::to_string(values.size()) +
                                " entries, network expects " + std::to_string(params_.size()));
  }
  std::copy(values.begin(), values.end(), params_.begin());
}

Eigen::VectorXd Mlp::forward(std::span<const double> x) const {
  Eigen::MatrixXd in = ConstVecMap(x.data(), static_cast<Eigen::Index>(x.size()));
  return forward(in).col(0);
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& x, MlpTape* tape) const {
  if (static_cast<std::size_t>(x.rows()) != input_dim()) {
    throw std::invalid_argument("Mlp input has " + std::to_string(x.rows()) + " rows, expected " +
                                std::to_string(input_dim()));
  }
  Eigen::MatrixXd h = x;
  if (!in_scale_.empty()) {
    const auto n = static_cast<Eigen::Index>(in_scale_.size());
    h.colwise() -= ConstVecMap(in_shift_.data(), n);
    h = h.array().colwise() * ConstVecMap(in_scale_.data(), n).array();
  }
  if (tape) {
    tape->input = h;
    tape->pre.clear();
    tape->post.clear();
  }
  for (std::size_t l = 0; l < num_layers(); ++l) {
    const auto n_in = static_cast<Eigen::Index>(sizes_[l]);
    const auto n_out = static_cast<Eigen::Index>(sizes_[l + 1]);
    ConstMatMap W(params_.data() + weight_offset(l), n_out, n_in);
    ConstVecMap b(params_.data() + bias_offset(l), n_out);
    Eigen::MatrixXd z = W * h;
    z.colwise() += b;
    if (tape) tape->pre.push_back(z);
    if (l + 1 < num_layers()) {
      h = z.unaryExpr(&silu);
      if (tape) tape->post.push_back(h);
    } else {
      switch (output_.kind) {
        case OutputActivation::Kind::identity:
          h = std::move(z);
          break;
        case OutputActivation::Kind::softplus:
          h = z.unaryExpr(&softplus);
          break;
        case OutputActivation::Kind::scaled_sigmoid: {
          const double lo = output_.lo, span = output_.hi - output_.lo;
          h = z.unaryExpr([lo, span](double u) { return lo + span * sigmoid(u); });
          break;
        }
      }
    }
  }
  return h;
}

Eigen::MatrixXd Mlp::backprop(const MlpTape& tape, const Eigen::MatrixXd& d_output,
                              double* grad) const {
  const std::size_t L = num_layers();
  if (tape.pre.size() != L) throw std::invalid_argument("tape does not match network");
  const Eigen::MatrixXd& z_last = tape.pre.back();
  if (d_output.rows() != z_last.rows() || d_output.cols() != z_last.cols()) {
    throw std::invalid_argument("output gradient shape does not match taped batch");
  }
  Eigen::MatrixXd dz;
  switch (output_.kind) {
    case OutputActivation::Kind::identity:
      dz = d_output;
      break;
    case OutputActivation::Kind::softplus:
      dz = d_output.cwiseProduct(z_last.unaryExpr(&sigmoid));
      break;
    case OutputActivation::Kind::scaled_sigmoid: {
      const double span = output_.hi - output_.lo;
      dz = d_output.cwiseProduct(z_last.unaryExpr([span](double u) {
        const double s = sigmoid(u);
        return span * s * (1.0 - s);
      }));
      break;
    }
  }
  for (std::size_t l = L; l-- > 0;) {
    const auto n_in = static_cast<Eigen::Index>(sizes_[l]);
    const auto n_out = static_cast<Eigen::Index>(sizes_[l + 1]);
    const Eigen::MatrixXd& h_prev = l == 0 ? tape.input : tape.post[l - 1];
    if (grad) {
      MatMap gW(grad + weight_offset(l), n_out, n_in);
      Eigen::Map<Eigen::VectorXd> gb(grad + bias_offset(l), n_out);
      gW.noalias() += dz * h_prev.transpose();
      gb += dz.rowwise().sum();
    }
    ConstMatMap W(params_.data() + weight_offset(l), n_out, n_in);
    Eigen::MatrixXd dh = W.transpose() * dz;
    if (l == 0) return dh;
    dz = dh.cwiseProduct(tape.pre[l - 1].unaryExpr(&silu_prime));
  }
  return {};
}

void Mlp::backward(const MlpTape& tape, const Eigen::MatrixXd& d_output,
                   std::span<double> grad) const {
  if (grad.size() != params_.size()) throw std::invalid_argument("gradient buffer size mismatch");
  backprop(tape, d_output, grad.data());
}

Eigen::MatrixXd Mlp::input_gradient(const MlpTape& tape, const Eigen::MatrixXd& d_output) const {
  Eigen::MatrixXd g = backprop(tape, d_output, nullptr);
  if (!in_scale_.empty()) {
    g = g.array().colwise() * ConstVecMap(in_scale_.data(), static_cast<Eigen::Index>(in_scale_.size())).array();
  }
  return g;
}

void Mlp::set_input_affine(const InputAffine& affine) {
  if (affine.shift.empty() && affine.scale.empty()) {
    in_shift_.clear();
    in_scale_.clear();
    return;
  }
  if (affine.shift.size() != input_dim() || affine.scale.size() != input_dim()) {
    throw std::invalid_argument("input affine map needs one shift and one scale per input");
  }
  in_shift_ = affine.shift;
  in_scale_ = affine.scale;
}

bool Mlp::same_architecture(const Mlp& other) const {
  return sizes_ == other.sizes_ && output_ == other.output_ && in_shift_ == other.in_shift_ &&
         in_scale_ == other.in_scale_;
}

void Mlp::check_finite(std::span<const double> grad, const std::string& name) const {
  for (std::size_t i = 0; i < grad.size(); ++i) {
    if (std::isfinite(grad[i])) continue;
    std::size_t layer = 0;
    while (layer + 1 < offsets_.size() && offsets_[layer + 1] <= i) ++layer;
    const std::size_t local = i - offsets_[layer];
    const std::size_t n_w = sizes_[layer] * sizes_[layer + 1];
    std::string where;
    if (local < n_w) {
      const std::size_t row = local % sizes_[layer + 1], col = local / sizes_[layer + 1];
      where = "W[" + std::to_string(row) + "," + std::to_string(col) + "]";
    } else {
      where = "b[" + std::to_string(local - n_w) + "]";
    }
    throw NumericalError("non-finite gradient in " + name + " at layer " + std::to_string(layer) +
                         " " + where + " (flat index " + std::to_string(i) + ")");
  }
}

void sync_target(const Mlp& source, Mlp& target) {
  if (!source.same_architecture(target)) {
    throw std::invalid_argument("sync_target: architectures differ");
  }
  target.set_parameters(source.parameters());
}

std::vector<std::size_t> mlp_layout(std::size_t in, std::size_t hidden, std::size_t depth,
                                    std::size_t out) {
  std::vector<std::size_t> sizes{in};
  for (std::size_t i = 0; i < depth; ++i) sizes.push_back(hidden);
  sizes.push_back(out);
  return sizes;
}

}  // namespace dynrisk
