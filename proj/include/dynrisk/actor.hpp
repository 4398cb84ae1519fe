#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "dynrisk/adam.hpp"
#include "dynrisk/critic.hpp"
#include "dynrisk/environment.hpp"
#include "dynrisk/policy.hpp"

namespace dynrisk {

struct ActorConfig {
  int epochs = 30;
  std::size_t base_batch = 500;
  LrSchedule lr{4e-3, 0.95, 50, 5e-4};
  /// The policy gradient omits the expected gradient of the continuation
  /// value (the critic is held fixed during the actor phase). Only `true` is
  /// implemented; the flag exists so configs state the approximation.
  bool drop_value_gradient = true;
  std::size_t threads = 1;

  /// ceil(base_batch / (1 - alpha_min)).
  std::size_t effective_batch(const Spectrum& spectrum) const;
};

/// Per-transition weights sum_m p_m/(1-alpha_m) (z - lambda_m)_+ with
/// z = c_t + V(s_{t+1}) (c_{T-1} alone in the last period) and lambda_m the
/// VaR levels at s_t. All inputs are data; nothing here is differentiated.
Eigen::VectorXd saddle_weights(const Spectrum& spectrum, const EpisodeBatch& batch,
                               const Eigen::MatrixXd& var_levels,
                               const Eigen::VectorXd& next_values);

/// Surrogate sum_n w_n log pi(a_n | s_n), whose policy gradient estimates the
/// gradient of the dynamic risk. `grad` (optional) receives d/dtheta.
double actor_loss(const Policy& policy, const ValueModel& value, const EpisodeBatch& batch,
                  std::vector<double>* grad = nullptr);

/// Loss and gradient from precomputed weights.
double weighted_log_prob_loss(const Policy& policy, const EpisodeBatch& batch,
                              const Eigen::VectorXd& weights, std::vector<double>* grad);

class ActorTrainer {
 public:
  ActorTrainer(Policy& policy, ActorConfig config, std::uint64_t seed);

  std::vector<LossTraceRow> train(const Environment& env, const ValueModel& value,
                                  std::int64_t iteration, TransitionCounter* counter = nullptr);

  Adam& optimizer() { return opt_; }
  const Adam& optimizer() const { return opt_; }
  std::uint64_t epochs_run() const { return epochs_; }
  void set_epochs_run(std::uint64_t n) { epochs_ = n; }
  const ActorConfig& config() const { return config_; }
  std::uint64_t seed() const { return seed_; }

 private:
  Policy& policy_;
  ActorConfig config_;
  std::uint64_t seed_;
  std::uint64_t epochs_ = 0;
  Adam opt_;
};

}  // namespace dynrisk
