#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace dynrisk {

class SpectrumError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Outcome of validating raw spectrum data. One message per violated rule.
struct SpectrumReport {
  std::vector<std::string> violations;
  bool ok() const noexcept { return violations.empty(); }
  std::string to_string() const;
};

SpectrumReport validate_spectrum(std::span<const double> thresholds,
                                 std::span<const double> weights);

/**
 * Finite-support spectral measure: a convex combination of point masses at
 * quantile levels. The one-step risk it defines is
 *
 *   rho(Z) = sum_m weight[m] * CVaR_{threshold[m]}(Z).
 *
 * A constructed Spectrum always satisfies: thresholds strictly increasing in
 * (0,1), weights positive and summing to one within 1e-12.
 */
class Spectrum {
 public:
  Spectrum(std::vector<double> thresholds, std::vector<double> weights);

  /// Single atom at `alpha`; the dynamic CVaR case.
  static Spectrum cvar(double alpha);

  /// Parses "0.5:0.4, 0.9:0.6" (threshold:weight records).
  static Spectrum parse(std::string_view text);
  std::string to_string() const;

  std::size_t size() const noexcept { return thresholds_.size(); }
  std::span<const double> thresholds() const noexcept { return thresholds_; }
  std::span<const double> weights() const noexcept { return weights_; }
  double threshold(std::size_t m) const { return thresholds_.at(m); }
  double weight(std::size_t m) const { return weights_.at(m); }
  double min_threshold() const noexcept { return thresholds_.front(); }

  bool operator==(const Spectrum&) const = default;

 private:
  std::vector<double> thresholds_;
  std::vector<double> weights_;
};

}  // namespace dynrisk
