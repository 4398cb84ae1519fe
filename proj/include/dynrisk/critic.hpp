#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "dynrisk/adam.hpp"
#include "dynrisk/environment.hpp"
#include "dynrisk/mlp.hpp"
#include "dynrisk/spectrum.hpp"
#include "dynrisk/tree.hpp"

namespace dynrisk {

class Policy;

/// Per-state VaR levels (rows = spectrum atoms) and risk-to-go.
struct ValueOutput {
  Eigen::MatrixXd var_levels;
  Eigen::VectorXd value;
};

/// Anything that can supply VaR levels and values for the actor.
class ValueModel {
 public:
  virtual ~ValueModel() = default;
  virtual const Spectrum& spectrum() const = 0;
  virtual ValueOutput evaluate(const Eigen::MatrixXd& states) const = 0;
};

/// var_m = sum_{l<=m} H_l, value = H_k + sum_m p_m var_m. `heads` is k x n.
ValueOutput compose_value(const Spectrum& spectrum, const Eigen::MatrixXd& heads);

/**
 * Networks H_1..H_k for a spectrum with k-1 atoms: H_1 has an identity output
 * (the lowest VaR), H_2..H_{k-1} softplus increments between consecutive VaRs,
 * and H_k a softplus gap between the spectral risk and the weighted VaRs.
 * Each net has a target copy that only moves on sync_targets().
 */
class ValueEnsemble final : public ValueModel {
 public:
  ValueEnsemble(Spectrum spectrum, std::size_t state_dim, std::size_t hidden, std::size_t depth,
                Rng& rng, const InputAffine& affine = {});
  ValueEnsemble(Spectrum spectrum, std::vector<Mlp> nets);

  const Spectrum& spectrum() const override { return spectrum_; }
  ValueOutput evaluate(const Eigen::MatrixXd& states) const override;
  ValueOutput evaluate_target(const Eigen::MatrixXd& states) const;

  std::size_t size() const { return nets_.size(); }
  std::size_t state_dim() const { return nets_.front().input_dim(); }
  Mlp& net(std::size_t l) { return nets_.at(l); }
  const Mlp& net(std::size_t l) const { return nets_.at(l); }
  const Mlp& target(std::size_t l) const { return targets_.at(l); }
  Mlp& target(std::size_t l) { return targets_.at(l); }
  void sync_targets();

 private:
  static Eigen::MatrixXd heads(const std::vector<Mlp>& nets, const Eigen::MatrixXd& states);

  Spectrum spectrum_;
  std::vector<Mlp> nets_;
  std::vector<Mlp> targets_;
};

/// Exact per-node values for a tree environment (state = (t/T, node id)).
class TabularValueModel final : public ValueModel {
 public:
  TabularValueModel(Spectrum spectrum, std::vector<TreeRiskLevels> levels);
  const Spectrum& spectrum() const override { return spectrum_; }
  ValueOutput evaluate(const Eigen::MatrixXd& states) const override;

 private:
  Spectrum spectrum_;
  std::vector<TreeRiskLevels> levels_;
};

/// Realized running risk-to-go y_{b,t} = c_t + V_target(s_{t+1}), or c_{T-1}
/// in the last period, in step order.
Eigen::VectorXd running_targets(const ValueEnsemble& ensemble, const EpisodeBatch& batch);

/**
 * Sum over (b, t) of score_spectral(current estimates at s_t, y_{b,t}).
 * If `grads` is non-null it receives one gradient vector per net. A score
 * argument at or below -C raises ScoreDomainError naming (t, b).
 */
double critic_loss(const ValueEnsemble& ensemble, const EpisodeBatch& batch, double cost_bound,
                   std::vector<std::vector<double>>* grads = nullptr);

struct LossTraceRow {
  std::string phase;
  std::int64_t iteration = 0;
  std::int64_t epoch = 0;
  double loss = 0.0;
  double lr = 0.0;
};

struct CriticConfig {
  int epochs = 1000;
  std::size_t batch = 750;
  int target_interval = 400;
  LrSchedule lr{5e-3, 0.95, 100, 0.0};
  double cost_bound = 1.0;
  std::size_t threads = 1;
};

/// Simulated-transition bookkeeping shared by the training loops.
struct TransitionCounter {
  std::uint64_t outer = 0;  // full-episode transitions
  std::uint64_t inner = 0;  // extra one-step transitions (nested only)
  std::uint64_t total() const { return outer + inner; }
};

/**
 * Owns the optimizer state for an ensemble. Each epoch draws a fresh batch
 * from substream derive_seed(seed, epoch counter), so consecutive calls
 * continue the same deterministic stream.
 */
class CriticTrainer {
 public:
  CriticTrainer(ValueEnsemble& ensemble, CriticConfig config, std::uint64_t seed);

  std::vector<LossTraceRow> train(const Environment& env, const Policy& policy,
                                  std::int64_t iteration, TransitionCounter* counter = nullptr);

  std::vector<Adam>& optimizers() { return opt_; }
  const std::vector<Adam>& optimizers() const { return opt_; }
  std::uint64_t epochs_run() const { return epochs_; }
  void set_epochs_run(std::uint64_t n) { epochs_ = n; }
  const CriticConfig& config() const { return config_; }

 private:
  ValueEnsemble& ensemble_;
  CriticConfig config_;
  std::uint64_t seed_;
  std::uint64_t epochs_ = 0;
  std::vector<Adam> opt_;
};

}  // namespace dynrisk
