#include "dynrisk/spectrum.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include <boost/algorithm/string.hpp>

namespace dynrisk {

std::string SpectrumReport::to_string() const {
  std::string out;
  for (const auto& v : violations) {
    if (!out.empty()) out += "; ";
    out += v;
  }
  return out;
}

SpectrumReport validate_spectrum(std::span<const double> thresholds,
                                 std::span<const double> weights) {
  SpectrumReport report;
  if (thresholds.size() != weights.size()) {
    report.violations.push_back("thresholds and weights differ in length (" +
                                std::to_string(thresholds.size()) + " vs " +
                                std::to_string(weights.size()) + ")");
  }
  if (thresholds.empty()) report.violations.push_back("spectrum has no atoms");

  for (std::size_t m = 0; m < thresholds.size(); ++m) {
    const double a = thresholds[m];
    if (!(a > 0.0 && a < 1.0)) {
      report.violations.push_back("threshold " + std::to_string(m) +
                                  " outside (0,1)");
    }
    if (m > 0 && !(thresholds[m - 1] < a)) {
      report.violations.push_back("thresholds not strictly increasing at index " +
                                  std::to_string(m));
    }
  }
  double total = 0.0;
  for (std::size_t m = 0; m < weights.size(); ++m) {
    if (!(weights[m] > 0.0 && weights[m] <= 1.0)) {
      report.violations.push_back("weight " + std::to_string(m) + " outside (0,1]");
    }
    total += weights[m];
  }
  if (!weights.empty() && !(std::abs(total - 1.0) <= 1e-12)) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", total);
    report.violations.push_back(std::string("weights sum to ") + buf + ", not 1");
  }
  return report;
}

Spectrum::Spectrum(std::vector<double> thresholds, std::vector<double> weights)
    : thresholds_(std::move(thresholds)), weights_(std::move(weights)) {
  const auto report = validate_spectrum(thresholds_, weights_);
  if (!report.ok()) throw SpectrumError("invalid spectrum: " + report.to_string());
}

Spectrum Spectrum::cvar(double alpha) { return Spectrum({alpha}, {1.0}); }

Spectrum Spectrum::parse(std::string_view text) {
  std::vector<std::string> records;
  boost::split(records, text, boost::is_any_of(",;"));
  std::vector<double> thresholds, weights;
  for (auto& rec : records) {
    boost::trim(rec);
    if (rec.empty()) continue;
    const auto colon = rec.find(':');
    try {
      if (colon == std::string::npos) {
        thresholds.push_back(std::stod(rec));
        weights.push_back(1.0);
      } else {
        thresholds.push_back(std::stod(rec.substr(0, colon)));
        weights.push_back(std::stod(rec.substr(colon + 1)));
      }
    } catch (const std::logic_error&) {
      throw SpectrumError("cannot parse spectrum record '" + rec + "'");
    }
  }
  return Spectrum(std::move(thresholds), std::move(weights));
}

std::string Spectrum::to_string() const {
  std::ostringstream os;
  os.precision(17);
  for (std::size_t m = 0; m < size(); ++m) {
    if (m) os << ", ";
    os << thresholds_[m] << ':' << weights_[m];
  }
  return os.str();
}

}  // namespace dynrisk
