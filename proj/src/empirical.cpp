#include "dynrisk/empirical.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace dynrisk {

namespace {

void require_samples(std::span<const double> samples) {
  if (samples.empty()) throw std::invalid_argument("empirical risk of an empty sample");
}

void require_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw std::invalid_argument("risk threshold alpha must lie in (0,1)");
  }
}

// 0-based order-statistic index of the left-continuous alpha-quantile of n
// equally weighted points.
std::size_t quantile_index(std::size_t n, double alpha) {
  const double pos = std::ceil((alpha - kQuantileTolerance) * static_cast<double>(n));
  const auto k = static_cast<std::ptrdiff_t>(pos) - 1;
  return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(k, 0, static_cast<std::ptrdiff_t>(n) - 1));
}

// Sorted atoms with normalized cumulative probabilities; the last entry is
// pinned to exactly one.
struct SortedDistribution {
  std::vector<double> values;
  std::vector<double> cumulative;
};

SortedDistribution sort_distribution(std::span<const double> values,
                                     std::span<const double> probs) {
  if (values.size() != probs.size()) {
    throw std::invalid_argument("values and probabilities differ in length");
  }
  require_samples(values);
  double total = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0) || !std::isfinite(p)) {
      throw std::invalid_argument("probabilities must be finite and nonnegative");
    }
    total += p;
  }
  if (!(total > 0.0)) throw std::invalid_argument("probabilities sum to zero");

  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  SortedDistribution out;
  out.values.reserve(values.size());
  out.cumulative.reserve(values.size());
  double running = 0.0;
  for (auto i : order) {
    running += probs[i];
    out.values.push_back(values[i]);
    out.cumulative.push_back(running / total);
  }
  out.cumulative.back() = 1.0;
  return out;
}

double sorted_var(const SortedDistribution& d, double alpha) {
  for (std::size_t i = 0; i < d.values.size(); ++i) {
    if (d.cumulative[i] >= alpha - kQuantileTolerance) return d.values[i];
  }
  return d.values.back();
}

// (1/(1-alpha)) * integral_alpha^1 VaR_u du, atom by atom.
double sorted_cvar(const SortedDistribution& d, double alpha) {
  double acc = 0.0;
  double prev = 0.0;
  for (std::size_t i = 0; i < d.values.size(); ++i) {
    const double lo = std::max(prev, alpha);
    const double mass = d.cumulative[i] - lo;
    if (mass > 0.0) acc += d.values[i] * mass;
    prev = d.cumulative[i];
  }
  return acc / (1.0 - alpha);
}

}  // namespace

double empirical_var(std::span<const double> samples, double alpha) {
  require_samples(samples);
  require_alpha(alpha);
  std::vector<double> work(samples.begin(), samples.end());
  const auto k = quantile_index(work.size(), alpha);
  std::nth_element(work.begin(), work.begin() + static_cast<std::ptrdiff_t>(k), work.end());
  return work[k];
}

double empirical_cvar(std::span<const double> samples, double alpha) {
  require_samples(samples);
  require_alpha(alpha);
  std::vector<double> work(samples.begin(), samples.end());
  const auto n = work.size();
  const auto k = quantile_index(n, alpha);
  std::nth_element(work.begin(), work.begin() + static_cast<std::ptrdiff_t>(k), work.end());
  const double q = work[k];
  // Everything after position k is >= q. Equivalent to the tail integral:
  // q + E[(X - q)_+] / (1 - alpha) with q an alpha-quantile.
  double excess = 0.0;
  for (std::size_t i = k + 1; i < n; ++i) excess += work[i] - q;
  return q + excess / (static_cast<double>(n) * (1.0 - alpha));
}

double empirical_spectral(std::span<const double> samples, const Spectrum& spectrum) {
  return empirical_risk(samples, spectrum).risk;
}

WeightedRisk empirical_risk(std::span<const double> samples, const Spectrum& spectrum) {
  require_samples(samples);
  WeightedRisk out;
  out.var_levels.resize(spectrum.size());
  if (spectrum.size() == 1) {
    out.var_levels[0] = empirical_var(samples, spectrum.threshold(0));
    out.risk = empirical_cvar(samples, spectrum.threshold(0));
    return out;
  }
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  const auto n = sorted.size();
  for (std::size_t m = 0; m < spectrum.size(); ++m) {
    const double alpha = spectrum.threshold(m);
    const auto k = quantile_index(n, alpha);
    const double q = sorted[k];
    double excess = 0.0;
    for (std::size_t i = k + 1; i < n; ++i) excess += sorted[i] - q;
    out.var_levels[m] = q;
    out.risk += spectrum.weight(m) * (q + excess / (static_cast<double>(n) * (1.0 - alpha)));
  }
  return out;
}

double weighted_var(std::span<const double> values, std::span<const double> probs,
                    double alpha) {
  require_alpha(alpha);
  return sorted_var(sort_distribution(values, probs), alpha);
}

double weighted_cvar(std::span<const double> values, std::span<const double> probs,
                     double alpha) {
  require_alpha(alpha);
  return sorted_cvar(sort_distribution(values, probs), alpha);
}

double weighted_spectral(std::span<const double> values, std::span<const double> probs,
                         const Spectrum& spectrum) {
  return weighted_risk(values, probs, spectrum).risk;
}

WeightedRisk weighted_risk(std::span<const double> values, std::span<const double> probs,
                           const Spectrum& spectrum) {
  const auto d = sort_distribution(values, probs);
  WeightedRisk out;
  out.var_levels.reserve(spectrum.size());
  for (std::size_t m = 0; m < spectrum.size(); ++m) {
    out.var_levels.push_back(sorted_var(d, spectrum.threshold(m)));
    out.risk += spectrum.weight(m) * sorted_cvar(d, spectrum.threshold(m));
  }
  return out;
}

}  // namespace dynrisk
