#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dynrisk/spectrum.hpp"

namespace dynrisk {

/// Raised when a score argument sits at or below -C, where the log
/// characterization is undefined.
class ScoreDomainError : public std::domain_error {
 public:
  ScoreDomainError(std::string argument, double value, double bound);
  const std::string& argument() const noexcept { return argument_; }
  double value() const noexcept { return value_; }

 private:
  std::string argument_;
  double value_;
};

struct ScoreParams {
  double cost_bound;  // C > 0, |Y| < C assumed
  Spectrum spectrum;

  ScoreParams(double cost_bound, Spectrum spectrum);
};

/// Estimates of (VaR_{alpha_1}, ..., VaR_{alpha_{k-1}}, rho).
struct RiskEstimate {
  std::vector<double> var_levels;
  double risk = 0.0;
};

/**
 * Strictly consistent score for (VaR_alpha, CVaR_alpha) with G1 constant and
 * G2(x) = -log(x + C):
 *
 *   S = log((a2+C)/(y+C)) - a2/(a2+C)
 *       + [(1{y<=a1} - alpha) a1 + 1{y>a1} y] / ((a2+C)(1-alpha))
 */
double score_cvar(double a1, double a2, double y, double alpha, double C);

/**
 * Score for (VaR_{alpha_1..alpha_{k-1}}, rho^phi) with G_m constant for m<k and
 * G_k(x) = -log(x + C). On a one-atom spectrum this is score_cvar.
 * Requires var_levels nondecreasing and matching the spectrum size.
 */
double score_spectral(const RiskEstimate& estimate, double y, const ScoreParams& params);

/// Unchecked core used by training loops; same value as score_spectral.
double score_spectral_raw(std::span<const double> var_levels, double risk, double y,
                          const Spectrum& spectrum, double C);

/**
 * Value and partial derivatives of score_spectral_raw. Indicator terms are
 * held at their forward-pass values, so d_var is the subgradient with
 * 1{y <= a_m} frozen.
 */
double score_spectral_grad(std::span<const double> var_levels, double risk, double y,
                           const Spectrum& spectrum, double C, std::span<double> d_var,
                           double& d_risk);

}  // namespace dynrisk
