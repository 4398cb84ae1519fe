#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "dynrisk/rng.hpp"

namespace dynrisk {

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Activation applied to the last layer. Hidden layers always use SiLU.
struct OutputActivation {
  enum class Kind { identity, softplus, scaled_sigmoid };
  Kind kind = Kind::identity;
  double lo = 0.0;  // scaled_sigmoid range
  double hi = 1.0;

  static OutputActivation identity() { return {}; }
  static OutputActivation softplus() { return {Kind::softplus, 0.0, 1.0}; }
  static OutputActivation scaled_sigmoid(double lo, double hi) {
    return {Kind::scaled_sigmoid, lo, hi};
  }
  std::string tag() const;
  static OutputActivation from_tag(const std::string& tag);
  bool operator==(const OutputActivation&) const = default;
};

/// Fixed input map x -> (x - shift) * scale; empty vectors mean identity.
struct InputAffine {
  std::vector<double> shift;
  std::vector<double> scale;
};

/// Activations retained by a batched forward pass for the backward pass.
struct MlpTape {
  Eigen::MatrixXd input;
  std::vector<Eigen::MatrixXd> pre;   // per layer, before activation
  std::vector<Eigen::MatrixXd> post;  // per hidden layer, after SiLU
};

/**
 * Fully connected feed-forward network with SiLU hidden units.
 *
 * Parameters live in one flat vector: for each layer, the weight matrix
 * (out x in, column-major) followed by the bias. Batched calls take samples
 * as columns.
 */
class Mlp {
 public:
  Mlp() = default;
  Mlp(std::vector<std::size_t> layer_sizes, OutputActivation output);

  /// Uniform(+-sqrt(6/(fan_in+fan_out))) weights, zero biases.
  void init_glorot(Rng& rng);

  std::size_t input_dim() const { return sizes_.front(); }
  std::size_t output_dim() const { return sizes_.back(); }
  std::size_t num_layers() const { return sizes_.size() - 1; }
  std::size_t num_parameters() const { return params_.size(); }
  const std::vector<std::size_t>& layer_sizes() const { return sizes_; }
  const OutputActivation& output_activation() const { return output_; }

  std::span<double> parameters() { return params_; }
  std::span<const double> parameters() const { return params_; }
  void set_parameters(std::span<const double> values);

  Eigen::VectorXd forward(std::span<const double> x) const;
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, MlpTape* tape = nullptr) const;

  /// Accumulates dL/dparams into `grad` given dL/doutput for the taped batch.
  void backward(const MlpTape& tape, const Eigen::MatrixXd& d_output,
                std::span<double> grad) const;

  /// Gradient of sum_n d_output(:,n) . output(:,n) wrt the inputs.
  Eigen::MatrixXd input_gradient(const MlpTape& tape, const Eigen::MatrixXd& d_output) const;

  bool same_architecture(const Mlp& other) const;

  /// Applied before the first layer; not a trainable parameter.
  void set_input_affine(const InputAffine& affine);
  const std::vector<double>& input_shift() const { return in_shift_; }
  const std::vector<double>& input_scale() const { return in_scale_; }

  /// Throws NumericalError naming the first non-finite entry of `grad`.
  void check_finite(std::span<const double> grad, const std::string& name) const;

 private:
  std::size_t weight_offset(std::size_t layer) const { return offsets_[layer]; }
  std::size_t bias_offset(std::size_t layer) const {
    return offsets_[layer] + sizes_[layer] * sizes_[layer + 1];
  }
  Eigen::MatrixXd backprop(const MlpTape& tape, const Eigen::MatrixXd& d_output,
                           double* grad) const;

  std::vector<std::size_t> sizes_;
  std::vector<std::size_t> offsets_;
  OutputActivation output_;
  std::vector<double> params_;
  std::vector<double> in_shift_, in_scale_;
};

/// Hard copy of parameters; architectures must match.
void sync_target(const Mlp& source, Mlp& target);

/// sizes = {in, hidden x depth, out}.
std::vector<std::size_t> mlp_layout(std::size_t in, std::size_t hidden, std::size_t depth,
                                    std::size_t out);

}  // namespace dynrisk
