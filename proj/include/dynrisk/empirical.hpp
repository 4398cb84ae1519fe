#pragma once

#include <span>
#include <vector>

#include "dynrisk/spectrum.hpp"

namespace dynrisk {

// Empirical risk functionals of a discrete distribution. Quantiles use the
// left-continuous generalized inverse: the smallest y with F(y) >= alpha, with
// cumulative probabilities compared at a 1e-12 tolerance so that e.g. eight
// draws out of ten reach alpha = 0.8 despite rounding.

inline constexpr double kQuantileTolerance = 1e-12;

/// Equally weighted samples.
double empirical_var(std::span<const double> samples, double alpha);
/// CVaR_alpha = 1/(1-alpha) * integral_alpha^1 VaR_u du, evaluated exactly
/// for the empirical distribution (the atom straddling alpha contributes
/// fractionally).
double empirical_cvar(std::span<const double> samples, double alpha);
double empirical_spectral(std::span<const double> samples, const Spectrum& spectrum);

/// Weighted atoms; probabilities need not be normalized but must be >= 0
/// with a positive total.
double weighted_var(std::span<const double> values, std::span<const double> probs,
                    double alpha);
double weighted_cvar(std::span<const double> values, std::span<const double> probs,
                     double alpha);
double weighted_spectral(std::span<const double> values, std::span<const double> probs,
                         const Spectrum& spectrum);

/// VaR at every spectrum threshold plus the spectral risk, in one sort.
struct WeightedRisk {
  std::vector<double> var_levels;
  double risk = 0.0;
};
WeightedRisk weighted_risk(std::span<const double> values, std::span<const double> probs,
                           const Spectrum& spectrum);
WeightedRisk empirical_risk(std::span<const double> samples, const Spectrum& spectrum);

}  // namespace dynrisk
