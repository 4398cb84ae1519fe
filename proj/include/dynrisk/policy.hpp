#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "dynrisk/mlp.hpp"
#include "dynrisk/rng.hpp"

namespace dynrisk {

/**
 * Stochastic policy over raw actions. Environments map raw actions to executed
 * ones (sigmoid trade, softmax weights, discrete index), so log-densities here
 * are always those of the raw sample.
 *
 * Parameters are exposed as one flat vector so a single Adam instance can
 * drive any policy.
 */
class Policy {
 public:
  virtual ~Policy() = default;

  virtual std::string kind() const = 0;
  virtual std::size_t state_dim() const = 0;
  virtual std::size_t action_dim() const = 0;

  virtual void sample(std::span<const double> state, Rng& rng, std::span<double> raw) const = 0;
  /// Deterministic representative action (the Gaussian mean, the modal index).
  virtual void mean_action(std::span<const double> state, std::span<double> raw) const = 0;
  virtual double log_prob(std::span<const double> state, std::span<const double> raw) const = 0;

  /// Returns log pi(raw_n | s_n) per column and accumulates
  /// sum_n coef[n] * d log pi(raw_n | s_n) / d params into `grad`.
  virtual Eigen::VectorXd log_prob_grad(const Eigen::MatrixXd& states,
                                        const Eigen::MatrixXd& raws,
                                        const Eigen::VectorXd& coef,
                                        std::span<double> grad) const = 0;

  virtual std::size_t num_parameters() const = 0;
  virtual std::vector<double> parameters() const = 0;
  virtual void set_parameters(std::span<const double> values) = 0;

  virtual std::unique_ptr<Policy> clone() const = 0;
};

/**
 * Diagonal Gaussian with an MLP mean and a state-independent learned log-std:
 * raw = mean(s) + exp(log_std) * z. Flat parameters are the MLP's followed by
 * log_std; log_std is clipped to [kLogStdMin, kLogStdMax] on every write.
 */
class GaussianPolicy final : public Policy {
 public:
  static constexpr double kLogStdMin = -4.0;
  static constexpr double kLogStdMax = 1.0;

  GaussianPolicy(Mlp mean, double initial_log_std);

  std::string kind() const override { return "gaussian"; }
  std::size_t state_dim() const override { return mean_.input_dim(); }
  std::size_t action_dim() const override { return mean_.output_dim(); }

  void sample(std::span<const double> state, Rng& rng, std::span<double> raw) const override;
  /// Reparameterized draw with explicit normals.
  void sample_with(std::span<const double> state, std::span<const double> z,
                   std::span<double> raw) const;
  void mean_action(std::span<const double> state, std::span<double> raw) const override;
  double log_prob(std::span<const double> state, std::span<const double> raw) const override;
  Eigen::VectorXd log_prob_grad(const Eigen::MatrixXd& states, const Eigen::MatrixXd& raws,
                                const Eigen::VectorXd& coef,
                                std::span<double> grad) const override;

  std::size_t num_parameters() const override { return mean_.num_parameters() + log_std_.size(); }
  std::vector<double> parameters() const override;
  void set_parameters(std::span<const double> values) override;
  std::unique_ptr<Policy> clone() const override;

  const Mlp& mean_net() const { return mean_; }
  const std::vector<double>& log_std() const { return log_std_; }

 private:
  Mlp mean_;
  std::vector<double> log_std_;
};

/**
 * Softmax over a logit table indexed by an integer-valued state coordinate
 * (e.g. a tree node id). The raw action is the chosen index as a double.
 */
class TabularSoftmaxPolicy final : public Policy {
 public:
  TabularSoftmaxPolicy(std::size_t state_dim, std::size_t index_coordinate,
                       std::size_t num_states, std::size_t num_actions);

  std::string kind() const override { return "tabular_softmax"; }
  std::size_t state_dim() const override { return state_dim_; }
  std::size_t action_dim() const override { return 1; }

  void sample(std::span<const double> state, Rng& rng, std::span<double> raw) const override;
  void mean_action(std::span<const double> state, std::span<double> raw) const override;
  double log_prob(std::span<const double> state, std::span<const double> raw) const override;
  Eigen::VectorXd log_prob_grad(const Eigen::MatrixXd& states, const Eigen::MatrixXd& raws,
                                const Eigen::VectorXd& coef,
                                std::span<double> grad) const override;

  std::size_t num_parameters() const override { return logits_.size(); }
  std::vector<double> parameters() const override { return logits_; }
  void set_parameters(std::span<const double> values) override;
  std::unique_ptr<Policy> clone() const override;

  std::size_t num_states() const { return num_states_; }
  std::size_t num_actions() const { return num_actions_; }
  std::size_t index_coordinate() const { return index_; }
  std::vector<double> probabilities(std::size_t state_index) const;
  /// probs[state][action] for every table row.
  std::vector<std::vector<double>> table() const;

 private:
  std::size_t row(std::span<const double> state) const;

  std::size_t state_dim_, index_, num_states_, num_actions_;
  std::vector<double> logits_;  // num_states x num_actions, row-major
};

/// Always emits the same raw action; no parameters, log-density 0.
class ConstantPolicy final : public Policy {
 public:
  ConstantPolicy(std::size_t state_dim, std::vector<double> raw);

  std::string kind() const override { return "constant"; }
  std::size_t state_dim() const override { return state_dim_; }
  std::size_t action_dim() const override { return raw_.size(); }
  void sample(std::span<const double>, Rng&, std::span<double> raw) const override;
  void mean_action(std::span<const double>, std::span<double> raw) const override;
  double log_prob(std::span<const double>, std::span<const double>) const override { return 0.0; }
  Eigen::VectorXd log_prob_grad(const Eigen::MatrixXd& states, const Eigen::MatrixXd&,
                                const Eigen::VectorXd&, std::span<double>) const override {
    return Eigen::VectorXd::Zero(states.cols());
  }
  std::size_t num_parameters() const override { return 0; }
  std::vector<double> parameters() const override { return {}; }
  void set_parameters(std::span<const double> values) override;
  std::unique_ptr<Policy> clone() const override;

  const std::vector<double>& raw() const { return raw_; }

 private:
  std::size_t state_dim_;
  std::vector<double> raw_;
};

/// Deterministic callback policy for tests and scripted baselines.
class FunctionPolicy final : public Policy {
 public:
  using Fn = std::function<void(std::span<const double> state, std::span<double> raw)>;
  FunctionPolicy(std::size_t state_dim, std::size_t action_dim, Fn fn);

  std::string kind() const override { return "function"; }
  std::size_t state_dim() const override { return state_dim_; }
  std::size_t action_dim() const override { return action_dim_; }
  void sample(std::span<const double> state, Rng&, std::span<double> raw) const override {
    fn_(state, raw);
  }
  void mean_action(std::span<const double> state, std::span<double> raw) const override {
    fn_(state, raw);
  }
  double log_prob(std::span<const double>, std::span<const double>) const override { return 0.0; }
  Eigen::VectorXd log_prob_grad(const Eigen::MatrixXd& states, const Eigen::MatrixXd&,
                                const Eigen::VectorXd&, std::span<double>) const override {
    return Eigen::VectorXd::Zero(states.cols());
  }
  std::size_t num_parameters() const override { return 0; }
  std::vector<double> parameters() const override { return {}; }
  void set_parameters(std::span<const double>) override {}
  std::unique_ptr<Policy> clone() const override;

 private:
  std::size_t state_dim_, action_dim_;
  Fn fn_;
};

}  // namespace dynrisk
