#pragma once

#include <span>

#include "dynrisk/environment.hpp"

namespace dynrisk {

/// Mean-reverting single-asset market with inventory, trading costs and a
/// terminal liquidation penalty.
struct StatArbSpec {
  int T = 5;
  double kappa = 2.0;
  double mu = 1.0;
  double sigma = 0.2;
  double phi1 = 0.005;
  double phi2 = 0.5;
  double q_min = -5.0;
  double q_max = 5.0;
  double a_min = -2.0;
  double a_max = 2.0;
  double dt = 0.0;  // <= 0 means 1/T
  /// Initial inventory is uniform on [-q0_spread, q0_spread] clamped to the
  /// inventory bounds; 0 starts every episode flat.
  double q0_spread = 0.0;

  double step_length() const { return dt > 0.0 ? dt : 1.0 / T; }
  double stationary_sd() const;
  /// 4 * (a_max T (mu + 3 sigma) + q_max^2 phi2).
  double default_cost_bound() const;
  void validate() const;
};

/// Exact OU transition over one step of length spec.step_length().
double ou_step(double s, const StatArbSpec& spec, double z);

/**
 * State (t/T, S_t, q_t); raw action r maps to the trade
 * a = a_min + (a_max - a_min) * sigmoid(r), which is then clipped so the new
 * inventory stays in [q_min, q_max]. The cost is the wealth decrement
 * c_t = a S_t + a^2 phi1, and the final period also liquidates:
 * c_{T-1} -= q_T S_T - q_T^2 phi2.
 */
class StatArbEnv final : public Environment {
 public:
  explicit StatArbEnv(StatArbSpec spec);

  std::string kind() const override { return "statarb"; }
  int horizon() const override { return spec_.T; }
  std::size_t state_dim() const override { return 3; }
  std::size_t raw_action_dim() const override { return 1; }
  std::size_t applied_action_dim() const override { return 1; }

  void initial_state(Rng& rng, std::span<double> state) const override;
  /// Price standardized by the stationary law, inventory by its largest bound.
  InputAffine input_affine() const override;
  double step(int t, std::span<const double> state, std::span<const double> raw, Rng& rng,
              std::span<double> next, std::span<double> applied) const override;

  /// Step with an explicit normal draw.
  double step_with(int t, std::span<const double> state, double raw, double z,
                   std::span<double> next, double& trade) const;

  double trade_from_raw(double raw) const;
  /// Inverse of trade_from_raw for a in (a_min, a_max).
  double raw_for_trade(double a) const;

  const StatArbSpec& spec() const { return spec_; }

 private:
  StatArbSpec spec_;
};

}  // namespace dynrisk
