#include "dynrisk/artifacts.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "dynrisk/empirical.hpp"
#include "dynrisk/portfolio.hpp"
#include "dynrisk/simple_envs.hpp"
#include "dynrisk/statarb.hpp"

namespace dynrisk {

std::string format_double(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", value);
  return buf;
}

CsvWriter::CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header,
                     bool append)
    : path_(path.string()) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const bool fresh = !append || !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
  out_.open(path, append ? std::ios::app : std::ios::trunc);
  if (!out_) throw std::runtime_error("cannot write " + path_);
  if (fresh) {
    for (const auto& h : header) field(h);
    end_row();
  }
}

CsvWriter& CsvWriter::field(const std::string& text) {
  if (!first_) out_ << ',';
  out_ << text;
  first_ = false;
  return *this;
}

CsvWriter& CsvWriter::field(double value) { return field(format_double(value)); }
CsvWriter& CsvWriter::field(std::int64_t value) { return field(std::to_string(value)); }
CsvWriter& CsvWriter::field(std::uint64_t value) { return field(std::to_string(value)); }

void CsvWriter::end_row() {
  out_ << '\n';
  first_ = true;
  if (!out_) throw std::runtime_error("write failed for " + path_);
}

void append_loss_trace(const std::filesystem::path& path, const std::vector<LossTraceRow>& rows) {
  CsvWriter csv(path, {"phase", "iteration", "epoch", "loss", "lr"}, true);
  for (const auto& r : rows) {
    csv.field(r.phase).field(r.iteration).field(r.epoch).field(r.loss).field(r.lr);
    csv.end_row();
  }
}

namespace {

double grid_value(double lo, double hi, std::size_t k, std::size_t n) {
  return n == 1 ? 0.5 * (lo + hi) : lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(n - 1);
}

void statarb_grid(const std::filesystem::path& path, const StatArbEnv& env, const Policy& policy,
                  std::size_t n) {
  const auto& s = env.spec();
  const double sd = s.stationary_sd();
  CsvWriter csv(path, {"t", "price", "inventory", "mean_trade"});
  std::vector<double> state(3), raw(1);
  for (int t = 0; t < s.T; ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        state = {static_cast<double>(t) / s.T, grid_value(s.mu - 3 * sd, s.mu + 3 * sd, i, n),
                 grid_value(s.q_min, s.q_max, j, n)};
        policy.mean_action(state, raw);
        const double trade = std::clamp(env.trade_from_raw(raw[0]), s.q_min - state[2], s.q_max - state[2]);
        csv.field(t).field(state[1]).field(state[2]).field(trade);
        csv.end_row();
      }
    }
  }
}

void portfolio_grid(const std::filesystem::path& path, const PortfolioEnv& env, const Policy& policy,
                    std::size_t n) {
  const std::size_t I = env.price_model().num_assets();
  const std::size_t K = env.slots();
  std::vector<std::string> header{"t"};
  for (std::size_t i = 0; i < I; ++i) header.push_back("price_" + std::to_string(i + 1));
  header.push_back("wealth");
  for (std::size_t k = 0; k < K; ++k) {
    header.push_back(k < I ? "weight_" + std::to_string(k + 1) : std::string("weight_cash"));
  }
  CsvWriter csv(path, header);
  std::vector<double> base(I), state(I + 2), raw(K), w(K);
  env.price_model().initial_prices(base);
  const std::size_t n2 = I > 1 ? n : 1;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n2; ++j) {
      state[0] = 0.0;
      for (std::size_t a = 0; a < I; ++a) state[a + 1] = base[a];
      state[1] = base[0] * grid_value(0.8, 1.2, i, n);
      if (I > 1) state[2] = base[1] * grid_value(0.8, 1.2, j, n);
      state[I + 1] = env.initial_wealth();
      policy.mean_action(state, raw);
      softmax_weights(raw, w);
      csv.field(0);
      for (std::size_t a = 1; a < I + 2; ++a) csv.field(state[a]);
      for (double x : w) csv.field(x);
      csv.end_row();
    }
  }
}

void tree_grid(const std::filesystem::path& path, const TreeEnv& env, const Policy& policy) {
  CsvWriter csv(path, {"node", "depth", "action", "probability"});
  const auto* tab = dynamic_cast<const TabularSoftmaxPolicy*>(&policy);
  const auto& mdp = env.mdp();
  for (std::size_t id = 0; id < mdp.size(); ++id) {
    const auto& node = mdp.node(id);
    if (node.is_leaf()) continue;
    std::vector<double> probs(node.actions.size(), 0.0);
    if (tab) {
      const auto p = tab->probabilities(id);
      for (std::size_t a = 0; a < probs.size(); ++a) probs[a] = p[a];
    } else {
      std::vector<double> state{static_cast<double>(node.depth) / mdp.horizon(), static_cast<double>(id)};
      std::vector<double> raw(1);
      policy.mean_action(state, raw);
      probs[static_cast<std::size_t>(std::clamp<long>(std::lround(raw[0]), 0, static_cast<long>(probs.size()) - 1))] = 1.0;
    }
    for (std::size_t a = 0; a < probs.size(); ++a) {
      csv.field(static_cast<std::uint64_t>(id)).field(node.depth).field(static_cast<std::uint64_t>(a)).field(probs[a]);
      csv.end_row();
    }
  }
}

void generic_grid(const std::filesystem::path& path, const Environment& env, const Policy& policy,
                  std::size_t n) {
  CsvWriter csv(path, {"t", "feature", "mean_action"});
  std::vector<double> state(env.state_dim(), 0.0), raw(env.raw_action_dim());
  for (int t = 0; t < env.horizon(); ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      state[0] = static_cast<double>(t) / env.horizon();
      if (state.size() > 1) state[1] = grid_value(-1.0, 1.0, i, n);
      policy.mean_action(state, raw);
      csv.field(t).field(state.size() > 1 ? state[1] : 0.0).field(raw[0]);
      csv.end_row();
    }
  }
}

}  // namespace

void write_policy_grid(const std::filesystem::path& path, const Environment& env,
                       const Policy& policy, std::size_t grid_points) {
  if (grid_points < 1) throw std::invalid_argument("policy grid needs at least one point per axis");
  if (const auto* s = dynamic_cast<const StatArbEnv*>(&env)) return statarb_grid(path, *s, policy, grid_points);
  if (const auto* p = dynamic_cast<const PortfolioEnv*>(&env)) return portfolio_grid(path, *p, policy, grid_points);
  if (const auto* t = dynamic_cast<const TreeEnv*>(&env)) return tree_grid(path, *t, policy);
  generic_grid(path, env, policy, grid_points);
}

EvaluationSummary write_evaluation(const std::filesystem::path& dir, const Environment& env,
                                   const Policy& policy, const Spectrum& spectrum,
                                   const std::string& method, std::size_t episodes,
                                   std::uint64_t seed, std::size_t threads) {
  EvaluationSummary summary;
  summary.episodes = episodes;
  CsvWriter pnl(dir / "pnl.csv", {"episode", "period", "wealth"});
  CsvWriter risk(dir / "risk_summary.csv",
                 {"method", "alpha", "episodes", "terminal_var", "terminal_cvar", "pnl_mean",
                  "pnl_q05", "pnl_q50", "pnl_q95"});
  if (episodes == 0) return summary;

  const EpisodeBatch batch = simulate_batch(env, policy, episodes, seed, threads);
  const int T = batch.horizon;
  summary.total_cost.resize(episodes);
  summary.terminal_pnl.resize(episodes);
  for (std::size_t b = 0; b < episodes; ++b) {
    double wealth = env.initial_wealth();
    double total = 0.0;
    pnl.field(static_cast<std::uint64_t>(b)).field(0).field(wealth);
    pnl.end_row();
    for (int t = 0; t < T; ++t) {
      total += batch.cost(b, t);
      wealth = env.initial_wealth() - total;
      pnl.field(static_cast<std::uint64_t>(b)).field(t + 1).field(wealth);
      pnl.end_row();
    }
    summary.total_cost[b] = total;
    summary.terminal_pnl[b] = -total;
  }

  std::vector<double> sorted = summary.terminal_pnl;
  std::sort(sorted.begin(), sorted.end());
  auto quantile = [&](double q) { return empirical_var(sorted, q); };
  double mean = 0.0;
  for (double x : sorted) mean += x;
  mean /= static_cast<double>(episodes);
  for (std::size_t m = 0; m < spectrum.size(); ++m) {
    const double a = spectrum.threshold(m);
    risk.field(method).field(a).field(static_cast<std::uint64_t>(episodes))
        .field(empirical_var(summary.total_cost, a))
        .field(empirical_cvar(summary.total_cost, a))
        .field(mean).field(quantile(0.05)).field(quantile(0.5)).field(quantile(0.95));
    risk.end_row();
  }
  return summary;
}

void write_rollouts(const std::filesystem::path& path, const Environment& env,
                    const Policy& policy, std::size_t episodes, std::uint64_t seed,
                    std::size_t threads) {
  std::vector<std::string> header{"episode", "period"};
  for (std::size_t i = 0; i < env.state_dim(); ++i) header.push_back("state_" + std::to_string(i));
  for (std::size_t i = 0; i < env.applied_action_dim(); ++i) header.push_back("action_" + std::to_string(i));
  header.push_back("cost");
  CsvWriter csv(path, header);
  if (episodes == 0) return;
  const EpisodeBatch batch = simulate_batch(env, policy, episodes, seed, threads);
  for (std::size_t b = 0; b < episodes; ++b) {
    for (int t = 0; t < batch.horizon; ++t) {
      csv.field(static_cast<std::uint64_t>(b)).field(t);
      const auto sc = static_cast<Eigen::Index>(batch.state_col(b, t));
      const auto n = static_cast<Eigen::Index>(batch.step_col(b, t));
      for (Eigen::Index i = 0; i < batch.states.rows(); ++i) csv.field(batch.states(i, sc));
      for (Eigen::Index i = 0; i < batch.actions.rows(); ++i) csv.field(batch.actions(i, n));
      csv.field(batch.costs(n));
      csv.end_row();
    }
  }
}

}  // namespace dynrisk
