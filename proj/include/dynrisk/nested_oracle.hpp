#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "dynrisk/environment.hpp"
#include "dynrisk/policy.hpp"
#include "dynrisk/spectrum.hpp"

namespace dynrisk {

/// Period index encoded in a state's first coordinate (t/T).
int state_period(std::span<const double> state, int horizon);

/**
 * Draws `count` one-step transitions from `state` (action resampled each
 * time) and writes z_i = c_i + continuation(s'_i), dropping the continuation
 * in the last period.
 */
void one_step_samples(const Environment& env, const Policy& policy, std::span<const double> state,
                      std::size_t count,
                      const std::function<double(std::span<const double>)>& continuation,
                      Rng& rng, std::vector<double>& out);

struct NestedOracleConfig {
  std::size_t inner_M = 1000;
  /// Inner sample size below the top level of exact recursion; 0 means inner_M.
  std::size_t inner_M_deep = 0;
  /// Pilot episodes used to size the state grids of the fitted tables.
  std::size_t outer_N = 1000;
  /// Remaining horizons up to this depth are nested exactly.
  int exact_depth = 2;
  /// Grid nodes per non-time state coordinate for fitted tables.
  std::size_t grid_points = 11;
  std::size_t threads = 1;
};

/**
 * Monte-Carlo dynamic risk of a fixed policy. With remaining horizon at most
 * exact_depth the estimate applies empirical_spectral to inner samples of
 * c + (recursive estimate at the successor). Longer horizons use continuation
 * values from per-period tables on a uniform grid, fitted backward and
 * interpolated multilinearly (clamped at the grid edges).
 */
class NestedRiskOracle {
 public:
  NestedRiskOracle(const Environment& env, const Policy& policy, Spectrum spectrum,
                   NestedOracleConfig config, std::uint64_t seed);

  /// Risk-to-go at one state, deterministic in (seed, stream).
  double value(std::span<const double> state, std::uint64_t stream) const;
  /// Column j is estimated on stream j.
  Eigen::VectorXd values(const Eigen::MatrixXd& states) const;

  const NestedOracleConfig& config() const { return config_; }

 private:
  struct Table {
    std::vector<double> lo, hi;
    std::vector<std::size_t> points;
    std::vector<double> values;  // row-major over grid coordinates
    double interpolate(std::span<const double> state) const;
  };

  double recurse(std::span<const double> state, int t, bool top, Rng& rng) const;
  void fit_tables();

  const Environment& env_;
  const Policy& policy_;
  Spectrum spectrum_;
  NestedOracleConfig config_;
  std::uint64_t seed_;
  std::vector<Table> tables_;  // indexed by period; empty when unused
};

/// Convenience wrapper matching the oracle operation's shape.
Eigen::VectorXd nested_dynamic_risk(const Environment& env, const Policy& policy,
                                    const Spectrum& spectrum, const Eigen::MatrixXd& states,
                                    const NestedOracleConfig& config, std::uint64_t seed);

}  // namespace dynrisk
