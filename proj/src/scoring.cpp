#include "dynrisk/scoring.hpp"

#include <cmath>
#include <cstdio>

namespace dynrisk {

namespace {

std::string describe(const std::string& argument, double value, double bound) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "score argument %s = %.9g violates the bound (must exceed -C = %.9g)",
                argument.c_str(), value, -bound);
  return buf;
}

void check_bound(const char* name, double value, double C) {
  if (!(value + C > 0.0) || !std::isfinite(value)) throw ScoreDomainError(name, value, C);
}

// Tail term of the score: [(1{y<=a} - alpha) a + 1{y>a} y] / (1 - alpha),
// i.e. a + (y - a)_+ / (1 - alpha) rewritten without the positive part.
inline double tail_term(double a, double y, double alpha) {
  const double below = (y <= a) ? 1.0 : 0.0;
  return ((below - alpha) * a + (1.0 - below) * y) / (1.0 - alpha);
}

}  // namespace

ScoreDomainError::ScoreDomainError(std::string argument, double value, double bound)
    : std::domain_error(describe(argument, value, bound)),
      argument_(std::move(argument)),
      value_(value) {}

ScoreParams::ScoreParams(double C, Spectrum s) : cost_bound(C), spectrum(std::move(s)) {
  if (!(C > 0.0) || !std::isfinite(C)) {
    throw std::invalid_argument("cost bound C must be a positive finite number");
  }
}

double score_cvar(double a1, double a2, double y, double alpha, double C) {
  check_bound("y", y, C);
  check_bound("a2", a2, C);
  const double shifted = a2 + C;
  return std::log(shifted / (y + C)) - a2 / shifted + tail_term(a1, y, alpha) / shifted;
}

double score_spectral_raw(std::span<const double> var_levels, double risk, double y,
                          const Spectrum& spectrum, double C) {
  check_bound("y", y, C);
  check_bound("risk", risk, C);
  const double shifted = risk + C;
  double tail = 0.0;
  for (std::size_t m = 0; m < var_levels.size(); ++m) {
    tail += spectrum.weight(m) * tail_term(var_levels[m], y, spectrum.threshold(m));
  }
  return std::log(shifted / (y + C)) - risk / shifted + tail / shifted;
}

double score_spectral(const RiskEstimate& estimate, double y, const ScoreParams& params) {
  const auto& v = estimate.var_levels;
  if (v.size() != params.spectrum.size()) {
    throw std::invalid_argument("estimate has " + std::to_string(v.size()) +
                                " VaR levels but spectrum has " +
                                std::to_string(params.spectrum.size()) + " atoms");
  }
  for (std::size_t m = 1; m < v.size(); ++m) {
    if (v[m] < v[m - 1]) throw std::invalid_argument("VaR levels must be nondecreasing");
  }
  return score_spectral_raw(v, estimate.risk, y, params.spectrum, params.cost_bound);
}

double score_spectral_grad(std::span<const double> var_levels, double risk, double y,
                           const Spectrum& spectrum, double C, std::span<double> d_var,
                           double& d_risk) {
  check_bound("y", y, C);
  check_bound("risk", risk, C);
  const double shifted = risk + C;
  double tail = 0.0;
  for (std::size_t m = 0; m < var_levels.size(); ++m) {
    const double alpha = spectrum.threshold(m);
    const double p = spectrum.weight(m);
    const double a = var_levels[m];
    tail += p * tail_term(a, y, alpha);
    const double below = (y <= a) ? 1.0 : 0.0;
    d_var[m] = p * (below - alpha) / ((1.0 - alpha) * shifted);
  }
  d_risk = 1.0 / shifted - C / (shifted * shifted) - tail / (shifted * shifted);
  return std::log(shifted / (y + C)) - risk / shifted + tail / shifted;
}

}  // namespace dynrisk
