#include "dynrisk/nested_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dynrisk/empirical.hpp"

namespace dynrisk {

int state_period(std::span<const double> state, int horizon) {
  return static_cast<int>(std::llround(state[0] * horizon));
}

void one_step_samples(const Environment& env, const Policy& policy, std::span<const double> state,
                      std::size_t count,
                      const std::function<double(std::span<const double>)>& continuation,
                      Rng& rng, std::vector<double>& out) {
  const int t = state_period(state, env.horizon());
  if (t < 0 || t >= env.horizon()) throw std::invalid_argument("state is not a decision state");
  const bool last = t + 1 == env.horizon();
  std::vector<double> raw(env.raw_action_dim()), applied(env.applied_action_dim());
  std::vector<double> next(env.state_dim());
  out.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    policy.sample(state, rng, raw);
    const double c = env.step(t, state, raw, rng, next, applied);
    out[i] = last ? c : c + continuation(next);
  }
}

double NestedRiskOracle::Table::interpolate(std::span<const double> state) const {
  const std::size_t D = lo.size();
  std::vector<std::size_t> base(D);
  std::vector<double> frac(D, 0.0);
  for (std::size_t d = 0; d < D; ++d) {
    if (points[d] == 1) {
      base[d] = 0;
      continue;
    }
    const double pos = std::clamp((state[d + 1] - lo[d]) / (hi[d] - lo[d]), 0.0, 1.0) *
                       static_cast<double>(points[d] - 1);
    base[d] = std::min(static_cast<std::size_t>(pos), points[d] - 2);
    frac[d] = pos - static_cast<double>(base[d]);
  }
  double acc = 0.0;
  for (std::size_t corner = 0; corner < (std::size_t{1} << D); ++corner) {
    double w = 1.0;
    std::size_t index = 0;
    for (std::size_t d = 0; d < D; ++d) {
      std::size_t k = base[d];
      if (points[d] > 1) {
        const bool up = (corner >> d) & 1;
        w *= up ? frac[d] : 1.0 - frac[d];
        k += up ? 1 : 0;
      } else if ((corner >> d) & 1) {
        w = 0.0;
      }
      index = index * points[d] + k;
    }
    if (w != 0.0) acc += w * values[index];
  }
  return acc;
}

NestedRiskOracle::NestedRiskOracle(const Environment& env, const Policy& policy, Spectrum spectrum,
                                   NestedOracleConfig config, std::uint64_t seed)
    : env_(env), policy_(policy), spectrum_(std::move(spectrum)), config_(config), seed_(seed) {
  if (config_.inner_M < 2) throw std::invalid_argument("nested oracle needs inner_M >= 2");
  if (config_.outer_N < 1) throw std::invalid_argument("nested oracle needs outer_N >= 1");
  if (config_.inner_M_deep == 0) config_.inner_M_deep = config_.inner_M;
  if (config_.exact_depth < 1) throw std::invalid_argument("exact_depth must be >= 1");
  if (config_.grid_points < 2) throw std::invalid_argument("grid_points must be >= 2");
  tables_.resize(static_cast<std::size_t>(env_.horizon()) + 1);
  if (env_.horizon() > config_.exact_depth) fit_tables();
}

double NestedRiskOracle::recurse(std::span<const double> state, int t, bool top, Rng& rng) const {
  const int T = env_.horizon();
  if (t >= T) return 0.0;
  const std::size_t M = top ? config_.inner_M : config_.inner_M_deep;
  std::vector<double> z;
  if (T - t <= config_.exact_depth) {
    one_step_samples(
        env_, policy_, state, M,
        [&](std::span<const double> s) { return recurse(s, t + 1, false, rng); }, rng, z);
  } else {
    const Table& table = tables_[static_cast<std::size_t>(t + 1)];
    one_step_samples(
        env_, policy_, state, M, [&](std::span<const double> s) { return table.interpolate(s); },
        rng, z);
  }
  return empirical_spectral(z, spectrum_);
}

void NestedRiskOracle::fit_tables() {
  const int T = env_.horizon();
  const std::size_t D = env_.state_dim() - 1;
  const EpisodeBatch pilot = simulate_batch(env_, policy_, config_.outer_N,
                                            derive_seed(seed_, 0x7069696c6f74ULL), config_.threads);
  // Tables are needed at every period whose predecessor has remaining horizon
  // beyond exact_depth.
  for (int u = T - config_.exact_depth; u >= 1; --u) {
    Table table;
    table.lo.assign(D, 0.0);
    table.hi.assign(D, 0.0);
    table.points.assign(D, 1);
    for (std::size_t d = 0; d < D; ++d) {
      double lo = INFINITY, hi = -INFINITY;
      for (std::size_t b = 0; b < pilot.episodes; ++b) {
        const double v =
            pilot.states(static_cast<Eigen::Index>(d + 1), static_cast<Eigen::Index>(pilot.state_col(b, u)));
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      table.lo[d] = lo;
      table.hi[d] = hi;
      table.points[d] = hi - lo > 1e-12 ? config_.grid_points : 1;
    }
    std::size_t nodes = 1;
    for (auto p : table.points) nodes *= p;
    table.values.assign(nodes, 0.0);
    parallel_for(nodes, config_.threads, [&](std::size_t node) {
      std::vector<double> state(D + 1);
      state[0] = static_cast<double>(u) / T;
      std::size_t rest = node;
      for (std::size_t d = D; d-- > 0;) {
        const std::size_t k = rest % table.points[d];
        rest /= table.points[d];
        state[d + 1] = table.points[d] == 1
                           ? table.lo[d]
                           : table.lo[d] + (table.hi[d] - table.lo[d]) * static_cast<double>(k) /
                                               static_cast<double>(table.points[d] - 1);
      }
      Rng rng(derive_seed(derive_seed(seed_, static_cast<std::uint64_t>(u) + 1), node));
      table.values[node] = recurse(state, u, true, rng);
    });
    tables_[static_cast<std::size_t>(u)] = std::move(table);
  }
}

double NestedRiskOracle::value(std::span<const double> state, std::uint64_t stream) const {
  Rng rng(derive_seed(seed_, stream));
  return recurse(state, state_period(state, env_.horizon()), true, rng);
}

Eigen::VectorXd NestedRiskOracle::values(const Eigen::MatrixXd& states) const {
  Eigen::VectorXd out(states.cols());
  parallel_for(static_cast<std::size_t>(states.cols()), config_.threads, [&](std::size_t j) {
    const Eigen::VectorXd s = states.col(static_cast<Eigen::Index>(j));
    out(static_cast<Eigen::Index>(j)) = value(std::span<const double>(s.data(), s.size()), j);
  });
  return out;
}

Eigen::VectorXd nested_dynamic_risk(const Environment& env, const Policy& policy,
                                    const Spectrum& spectrum, const Eigen::MatrixXd& states,
                                    const NestedOracleConfig& config, std::uint64_t seed) {
  return NestedRiskOracle(env, policy, spectrum, config, seed).values(states);
}

}  // namespace dynrisk
