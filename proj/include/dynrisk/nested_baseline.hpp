#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "dynrisk/actor.hpp"
#include "dynrisk/critic.hpp"
#include "dynrisk/environment.hpp"
#include "dynrisk/mlp.hpp"
#include "dynrisk/policy.hpp"

namespace dynrisk {

struct NestedConfig {
  std::size_t inner_M = 100;
  int epochs = 1000;
  std::size_t batch = 750;
  int target_interval = 400;
  LrSchedule lr{5e-3, 0.95, 100, 0.0};
  std::size_t threads = 1;
};

/// Per-transition nested estimates: spectral risk and VaR levels of the
/// inner sample at each visited state (columns in step order).
struct NestedTargets {
  Eigen::VectorXd risk;
  Eigen::MatrixXd var_levels;
  std::uint64_t fresh_transitions = 0;
};

/**
 * For every visited s_t the inner sample is the realized outer transition plus
 * inner_M - 1 fresh one-step transitions, each scored as c + V_target(s')
 * (c alone in the last period). The fresh draws of transition n use
 * substream derive_seed(seed, n).
 */
NestedTargets nested_targets(const Environment& env, const Policy& policy,
                             const EpisodeBatch& batch, const Mlp& value_target,
                             const Spectrum& spectrum, std::size_t inner_M, std::uint64_t seed,
                             std::size_t threads = 1);

/// Sum of squared errors between V(s_t) and `targets`; optional gradient.
double nested_critic_loss(const Mlp& value, const EpisodeBatch& batch,
                          const Eigen::VectorXd& targets, std::vector<double>* grad = nullptr);

/// Single value net with a target copy; exposes the ValueModel view for
/// values (VaR levels are not modelled and are reported as the value).
class NestedValue final : public ValueModel {
 public:
  NestedValue(Spectrum spectrum, std::size_t state_dim, std::size_t hidden, std::size_t depth,
              Rng& rng, const InputAffine& affine = {});
  NestedValue(Spectrum spectrum, Mlp net);

  const Spectrum& spectrum() const override { return spectrum_; }
  ValueOutput evaluate(const Eigen::MatrixXd& states) const override;

  Mlp& net() { return net_; }
  const Mlp& net() const { return net_; }
  Mlp& target() { return target_; }
  const Mlp& target() const { return target_; }
  void sync_target() { dynrisk::sync_target(net_, target_); }

 private:
  Spectrum spectrum_;
  Mlp net_;
  Mlp target_;
};

class NestedCriticTrainer {
 public:
  NestedCriticTrainer(NestedValue& value, NestedConfig config, std::uint64_t seed);
  std::vector<LossTraceRow> train(const Environment& env, const Policy& policy,
                                  std::int64_t iteration, TransitionCounter* counter = nullptr);
  Adam& optimizer() { return opt_; }
  const Adam& optimizer() const { return opt_; }
  std::uint64_t epochs_run() const { return epochs_; }
  void set_epochs_run(std::uint64_t n) { epochs_ = n; }

 private:
  NestedValue& value_;
  NestedConfig config_;
  std::uint64_t seed_;
  std::uint64_t epochs_ = 0;
  Adam opt_;
};

/// Actor step for the nested method: the same weighted log-likelihood as the
/// elicitable actor, with lambda_m the empirical VaR of the inner sample.
class NestedActorTrainer {
 public:
  NestedActorTrainer(Policy& policy, ActorConfig config, std::size_t inner_M, std::uint64_t seed);
  std::vector<LossTraceRow> train(const Environment& env, const NestedValue& value,
                                  std::int64_t iteration, TransitionCounter* counter = nullptr);
  Adam& optimizer() { return opt_; }
  const Adam& optimizer() const { return opt_; }
  std::uint64_t epochs_run() const { return epochs_; }
  void set_epochs_run(std::uint64_t n) { epochs_ = n; }

 private:
  Policy& policy_;
  ActorConfig config_;
  std::size_t inner_M_;
  std::uint64_t seed_;
  std::uint64_t epochs_ = 0;
  Adam opt_;
};

}  // namespace dynrisk
