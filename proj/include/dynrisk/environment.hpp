#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>

#include <Eigen/Core>

#include "dynrisk/mlp.hpp"
#include "dynrisk/rng.hpp"

namespace dynrisk {

class Policy;

/**
 * Episodic, finite-horizon simulator. Implementations are immutable after
 * construction; every call is pure given the Rng, so batches can be simulated
 * from any number of threads.
 *
 * State layout convention: state[0] is normalized time t/T.
 */
class Environment {
 public:
  virtual ~Environment() = default;

  virtual std::string kind() const = 0;
  virtual int horizon() const = 0;
  virtual std::size_t state_dim() const = 0;
  /// Dimension of what the policy emits (pre-squash sample).
  virtual std::size_t raw_action_dim() const = 0;
  /// Dimension of what the market executes (trade, portfolio weights, ...).
  virtual std::size_t applied_action_dim() const = 0;
  /// Wealth before the first period; PnL exports report y_0 - sum of costs.
  virtual double initial_wealth() const { return 0.0; }
  /// Input standardization for the networks that read this state; identity by default.
  virtual InputAffine input_affine() const { return {}; }

  virtual void initial_state(Rng& rng, std::span<double> state) const = 0;

  /// One transition from period t. Writes the next state and the executed
  /// action; returns the cost c_t.
  virtual double step(int t, std::span<const double> state, std::span<const double> raw_action,
                      Rng& rng, std::span<double> next_state,
                      std::span<double> applied_action) const = 0;
};

/// B full trajectories over T periods. Column layouts:
///   states      state_dim x B(T+1),  column b(T+1)+t
///   raw_actions raw_dim   x BT,      column bT+t
///   actions     applied   x BT,      column bT+t
///   costs       BT,                  entry bT+t
struct EpisodeBatch {
  std::size_t episodes = 0;
  int horizon = 0;
  Eigen::MatrixXd states;
  Eigen::MatrixXd raw_actions;
  Eigen::MatrixXd actions;
  Eigen::VectorXd costs;

  EpisodeBatch() = default;
  EpisodeBatch(const Environment& env, std::size_t episodes);

  std::size_t state_col(std::size_t b, int t) const {
    return b * static_cast<std::size_t>(horizon + 1) + static_cast<std::size_t>(t);
  }
  std::size_t step_col(std::size_t b, int t) const {
    return b * static_cast<std::size_t>(horizon) + static_cast<std::size_t>(t);
  }
  double cost(std::size_t b, int t) const { return costs(static_cast<Eigen::Index>(step_col(b, t))); }
  std::size_t transitions() const { return episodes * static_cast<std::size_t>(horizon); }

  /// States s_t (every t < T) as columns in step order.
  Eigen::MatrixXd decision_states() const;
  /// Successor states s_{t+1} in step order.
  Eigen::MatrixXd next_states() const;

  bool operator==(const EpisodeBatch& o) const;
};

/// Fills episode b of `batch` using `rng`.
void simulate_episode(const Environment& env, const Policy& policy, Rng& rng,
                      EpisodeBatch& batch, std::size_t b);

/// B independent episodes; episode b draws from substream derive_seed(seed, b),
/// so the result is identical for any thread count.
EpisodeBatch simulate_batch(const Environment& env, const Policy& policy, std::size_t episodes,
                            std::uint64_t seed, std::size_t threads = 1);

/// Runs fn(i) for i in [0, n) over up to `threads` workers.
template <class Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn);

}  // namespace dynrisk

#include "dynrisk/detail/parallel.hpp"
