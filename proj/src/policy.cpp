#include "dynrisk/policy.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace dynrisk {

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;  // log(2*pi)/2

void require_size(std::size_t got, std::size_t want, const char* what) {
  if (got != want) {
    throw std::invalid_argument(std::string(what) + ": got " + std::to_string(got) +
                                " entries, expected " + std::to_string(want));
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// GaussianPolicy

GaussianPolicy::GaussianPolicy(Mlp mean, double initial_log_std)
    : mean_(std::move(mean)),
      log_std_(mean_.output_dim(), std::clamp(initial_log_std, kLogStdMin, kLogStdMax)) {}

void GaussianPolicy::sample(std::span<const double> state, Rng& rng, std::span<double> raw) const {
  std::vector<double> z(action_dim());
  for (auto& v : z) v = rng.normal();
  sample_with(state, z, raw);
}

void GaussianPolicy::sample_with(std::span<const double> state, std::span<const double> z,
                                 std::span<double> raw) const {
  require_size(z.size(), action_dim(), "GaussianPolicy noise");
  require_size(raw.size(), action_dim(), "GaussianPolicy action");
  const Eigen::VectorXd mu = mean_.forward(state);
  for (std::size_t i = 0; i < raw.size(); ++i) {
    raw[i] = mu(static_cast<Eigen::Index>(i)) + std::exp(log_std_[i]) * z[i];
  }
}

void GaussianPolicy::mean_action(std::span<const double> state, std::span<double> raw) const {
  require_size(raw.size(), action_dim(), "GaussianPolicy action");
  const Eigen::VectorXd mu = mean_.forward(state);
  for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = mu(static_cast<Eigen::Index>(i));
}

double GaussianPolicy::log_prob(std::span<const double> state, std::span<const double> raw) const {
  require_size(raw.size(), action_dim(), "GaussianPolicy action");
  const Eigen::VectorXd mu = mean_.forward(state);
  double lp = 0.0;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const double u = (raw[i] - mu(static_cast<Eigen::Index>(i))) * std::exp(-log_std_[i]);
    lp += -0.5 * u * u - log_std_[i] - kHalfLog2Pi;
  }
  return lp;
}

Eigen::VectorXd GaussianPolicy::log_prob_grad(const Eigen::MatrixXd& states,
                                              const Eigen::MatrixXd& raws,
                                              const Eigen::VectorXd& coef,
                                              std::span<double> grad) const {
  require_size(grad.size(), num_parameters(), "GaussianPolicy gradient");
  const auto n = states.cols();
  if (raws.cols() != n || coef.size() != n ||
      static_cast<std::size_t>(raws.rows()) != action_dim()) {
    throw std::invalid_argument("GaussianPolicy::log_prob_grad: batch shape mismatch");
  }
  MlpTape tape;
  const Eigen::MatrixXd mu = mean_.forward(states, &tape);
  const auto d = static_cast<Eigen::Index>(action_dim());
  Eigen::VectorXd lp = Eigen::VectorXd::Zero(n);
  Eigen::MatrixXd d_mu(d, n);
  std::span<double> g_log_std = grad.subspan(mean_.num_parameters());
  for (Eigen::Index i = 0; i < d; ++i) {
    const double ls = log_std_[static_cast<std::size_t>(i)];
    const double inv_var = std::exp(-2.0 * ls);
    double g_ls = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      const double diff = raws(i, j) - mu(i, j);
      lp(j) += -0.5 * diff * diff * inv_var - ls - kHalfLog2Pi;
      d_mu(i, j) = coef(j) * diff * inv_var;
      g_ls += coef(j) * (diff * diff * inv_var - 1.0);
    }
    g_log_std[static_cast<std::size_t>(i)] += g_ls;
  }
  mean_.backward(tape, d_mu, grad.subspan(0, mean_.num_parameters()));
  return lp;
}

std::vector<double> GaussianPolicy::parameters() const {
  std::vector<double> out(mean_.parameters().begin(), mean_.parameters().end());
  out.insert(out.end(), log_std_.begin(), log_std_.end());
  return out;
}

void GaussianPolicy::set_parameters(std::span<const double> values) {
  require_size(values.size(), num_parameters(), "GaussianPolicy parameters");
  mean_.set_parameters(values.subspan(0, mean_.num_parameters()));
  for (std::size_t i = 0; i < log_std_.size(); ++i) {
    log_std_[i] = std::clamp(values[mean_.num_parameters() + i], kLogStdMin, kLogStdMax);
  }
}

std::unique_ptr<Policy> GaussianPolicy::clone() const {
  return std::make_unique<GaussianPolicy>(*this);
}

// ---------------------------------------------------------------------------
// TabularSoftmaxPolicy

TabularSoftmaxPolicy::TabularSoftmaxPolicy(std::size_t state_dim, std::size_t index_coordinate,
                                           std::size_t num_states, std::size_t num_actions)
    : state_dim_(state_dim),
      index_(index_coordinate),
      num_states_(num_states),
      num_actions_(num_actions),
      logits_(num_states * num_actions, 0.0) {
  if (index_ >= state_dim_) throw std::invalid_argument("index coordinate outside the state");
  if (num_states_ == 0 || num_actions_ == 0) {
    throw std::invalid_argument("tabular policy needs at least one state and one action");
  }
}

std::size_t TabularSoftmaxPolicy::row(std::span<const double> state) const {
  require_size(state.size(), state_dim_, "TabularSoftmaxPolicy state");
  const double v = state[index_];
  const auto r = static_cast<long long>(std::llround(v));
  if (r < 0 || static_cast<std::size_t>(r) >= num_states_ || std::abs(v - double(r)) > 1e-9) {
    throw std::out_of_range("state index " + std::to_string(v) + " outside the policy table");
  }
  return static_cast<std::size_t>(r);
}

std::vector<double> TabularSoftmaxPolicy::probabilities(std::size_t s) const {
  const double* l = logits_.data() + s * num_actions_;
  const double mx = *std::max_element(l, l + num_actions_);
  std::vector<double> p(num_actions_);
  double total = 0.0;
  for (std::size_t a = 0; a < num_actions_; ++a) total += p[a] = std::exp(l[a] - mx);
  for (auto& v : p) v /= total;
  return p;
}

std::vector<std::vector<double>> TabularSoftmaxPolicy::table() const {
  std::vector<std::vector<double>> out(num_states_);
  for (std::size_t s = 0; s < num_states_; ++s) out[s] = probabilities(s);
  return out;
}

void TabularSoftmaxPolicy::sample(std::span<const double> state, Rng& rng,
                                  std::span<double> raw) const {
  const auto p = probabilities(row(state));
  const double u = rng.uniform();
  double acc = 0.0;
  std::size_t a = 0;
  for (; a + 1 < num_actions_; ++a) {
    acc += p[a];
    if (u < acc) break;
  }
  raw[0] = static_cast<double>(a);
}

void TabularSoftmaxPolicy::mean_action(std::span<const double> state, std::span<double> raw) const {
  const auto p = probabilities(row(state));
  raw[0] = static_cast<double>(std::max_element(p.begin(), p.end()) - p.begin());
}

double TabularSoftmaxPolicy::log_prob(std::span<const double> state,
                                      std::span<const double> raw) const {
  const std::size_t s = row(state);
  const auto a = static_cast<std::size_t>(std::llround(raw[0]));
  if (a >= num_actions_) throw std::out_of_range("action index outside the policy table");
  return std::log(probabilities(s)[a]);
}

Eigen::VectorXd TabularSoftmaxPolicy::log_prob_grad(const Eigen::MatrixXd& states,
                                                    const Eigen::MatrixXd& raws,
                                                    const Eigen::VectorXd& coef,
                                                    std::span<double> grad) const {
  require_size(grad.size(), num_parameters(), "TabularSoftmaxPolicy gradient");
  const auto n = states.cols();
  Eigen::VectorXd lp(n);
  std::vector<double> st(state_dim_);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < state_dim_; ++i) st[i] = states(static_cast<Eigen::Index>(i), j);
    const std::size_t s = row(st);
    const auto a = static_cast<std::size_t>(std::llround(raws(0, j)));
    if (a >= num_actions_) throw std::out_of_range("action index outside the policy table");
    const auto p = probabilities(s);
    lp(j) = std::log(p[a]);
    for (std::size_t k = 0; k < num_actions_; ++k) {
      grad[s * num_actions_ + k] += coef(j) * ((k == a ? 1.0 : 0.0) - p[k]);
    }
  }
  return lp;
}

void TabularSoftmaxPolicy::set_parameters(std::span<const double> values) {
  require_size(values.size(), logits_.size(), "TabularSoftmaxPolicy parameters");
  std::copy(values.begin(), values.end(), logits_.begin());
}

std::unique_ptr<Policy> TabularSoftmaxPolicy::clone() const {
  return std::make_unique<TabularSoftmaxPolicy>(*this);
}

// ---------------------------------------------------------------------------
// ConstantPolicy, FunctionPolicy

ConstantPolicy::ConstantPolicy(std::size_t state_dim, std::vector<double> raw)
    : state_dim_(state_dim), raw_(std::move(raw)) {}

void ConstantPolicy::sample(std::span<const double>, Rng&, std::span<double> raw) const {
  std::copy(raw_.begin(), raw_.end(), raw.begin());
}

void ConstantPolicy::mean_action(std::span<const double>, std::span<double> raw) const {
  std::copy(raw_.begin(), raw_.end(), raw.begin());
}

void ConstantPolicy::set_parameters(std::span<const double> values) {
  require_size(values.size(), 0, "ConstantPolicy parameters");
}

std::unique_ptr<Policy> ConstantPolicy::clone() const {
  return std::make_unique<ConstantPolicy>(*this);
}

FunctionPolicy::FunctionPolicy(std::size_t state_dim, std::size_t action_dim, Fn fn)
    : state_dim_(state_dim), action_dim_(action_dim), fn_(std::move(fn)) {}

std::unique_ptr<Policy> FunctionPolicy::clone() const {
  return std::make_unique<FunctionPolicy>(*this);
}

}  // namespace dynrisk
