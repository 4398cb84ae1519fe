#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <vector>

#include "dynrisk/rng.hpp"

namespace testing {

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("dynrisk_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

/// Independent sorted-tail CVaR for equally weighted samples: integrates the
/// empirical quantile function over [alpha, 1] piece by piece.
inline double tail_integral_cvar(std::vector<double> x, double alpha) {
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double lo = std::max(alpha, static_cast<double>(i) / n);
    const double hi = static_cast<double>(i + 1) / n;
    if (hi > lo) acc += (hi - lo) * x[i];
  }
  return acc / (1.0 - alpha);
}

inline double mean(const std::vector<double>& x) {
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

inline double variance(const std::vector<double>& x) {
  const double m = mean(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return s / static_cast<double>(x.size() - 1);
}

}  // namespace testing
