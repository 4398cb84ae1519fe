#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "dynrisk/critic.hpp"
#include "dynrisk/environment.hpp"
#include "dynrisk/policy.hpp"
#include "dynrisk/spectrum.hpp"

namespace dynrisk {

/// Comma-separated writer; doubles are printed with %.9g.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header,
            bool append = false);

  CsvWriter& field(const std::string& text);
  CsvWriter& field(double value);
  CsvWriter& field(std::int64_t value);
  CsvWriter& field(std::uint64_t value);
  CsvWriter& field(int value) { return field(static_cast<std::int64_t>(value)); }
  void end_row();
  void flush() { out_.flush(); }

 private:
  std::ofstream out_;
  std::string path_;
  bool first_ = true;
};

std::string format_double(double value);

void append_loss_trace(const std::filesystem::path& path, const std::vector<LossTraceRow>& rows);

/**
 * Mean executed action of `policy` on an environment-specific grid:
 *   stat-arb   t, price, inventory, mean_trade (grid_points^2 per period)
 *   portfolio  t, price_1..price_I, wealth, weight_1..weight_K on a grid over
 *              the first two asset prices at t = 0 (0.8 to 1.2 times S_0)
 *   tree       node, depth, action, probability
 *   constant   t, feature, mean_action
 */
void write_policy_grid(const std::filesystem::path& path, const Environment& env,
                       const Policy& policy, std::size_t grid_points);

struct EvaluationSummary {
  std::size_t episodes = 0;
  std::vector<double> total_cost;  // per episode
  std::vector<double> terminal_pnl;
};

/**
 * Simulates `episodes` episodes under the stochastic policy and writes
 * pnl.csv (episode, period, wealth) with wealth_t = y_0 - sum_{s<t} c_s and
 * risk_summary.csv (one row per spectrum atom; VaR and CVaR are of the total
 * cost). Zero episodes give header-only files.
 */
EvaluationSummary write_evaluation(const std::filesystem::path& dir, const Environment& env,
                                   const Policy& policy, const Spectrum& spectrum,
                                   const std::string& method, std::size_t episodes,
                                   std::uint64_t seed, std::size_t threads);

/// Env-only rollouts: episode, period, state_*, action_*, cost.
void write_rollouts(const std::filesystem::path& path, const Environment& env,
                    const Policy& policy, std::size_t episodes, std::uint64_t seed,
                    std::size_t threads);

}  // namespace dynrisk
