#include "dynrisk/simple_envs.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "dynrisk/data.hpp"

namespace dynrisk {

ConstantCostEnv::ConstantCostEnv(int T, double cost) : T_(T), cost_(cost) {
  if (T < 1) throw std::invalid_argument("constant env: T must be >= 1");
}

void ConstantCostEnv::initial_state(Rng& rng, std::span<double> state) const {
  state[0] = 0.0;
  state[1] = 2.0 * rng.uniform() - 1.0;
}

double ConstantCostEnv::step(int t, std::span<const double>, std::span<const double> raw,
                             Rng& rng, std::span<double> next, std::span<double> applied) const {
  applied[0] = raw[0];
  next[0] = static_cast<double>(t + 1) / T_;
  next[1] = 2.0 * rng.uniform() - 1.0;
  return cost_;
}

TreeEnv::TreeEnv(FiniteTreeMdp mdp, std::vector<double> initial)
    : mdp_(std::move(mdp)), roots_(mdp_.roots()), initial_(std::move(initial)) {
  if (initial_.empty()) {
    initial_.assign(roots_.size(), 0.0);
    initial_[0] = 1.0;
  }
  if (initial_.size() != roots_.size()) {
    throw TreeStructureError("initial distribution has " + std::to_string(initial_.size()) +
                             " entries for " + std::to_string(roots_.size()) + " roots");
  }
  const double total = std::accumulate(initial_.begin(), initial_.end(), 0.0);
  for (double p : initial_) {
    if (p < 0.0) throw TreeStructureError("negative initial probability");
  }
  if (std::abs(total - 1.0) > 1e-12) throw TreeStructureError("initial distribution must sum to 1");
}

void TreeEnv::initial_state(Rng& rng, std::span<double> state) const {
  const double u = rng.uniform();
  double acc = 0.0;
  std::size_t k = 0;
  for (; k + 1 < roots_.size(); ++k) {
    acc += initial_[k];
    if (u < acc) break;
  }
  state[0] = 0.0;
  state[1] = static_cast<double>(roots_[k]);
}

double TreeEnv::step(int t, std::span<const double> state, std::span<const double> raw, Rng& rng,
                     std::span<double> next, std::span<double> applied) const {
  const auto id = static_cast<std::size_t>(std::llround(state[1]));
  const TreeNode& node = mdp_.node(id);
  const auto a = static_cast<std::size_t>(std::llround(raw[0]));
  if (a >= node.actions.size()) {
    throw std::out_of_range("action " + std::to_string(a) + " not available at node " +
                            std::to_string(id));
  }
  const auto& edges = node.actions[a];
  const double u = rng.uniform();
  double acc = 0.0;
  std::size_t e = 0;
  for (; e + 1 < edges.size(); ++e) {
    acc += edges[e].probability;
    if (u < acc) break;
  }
  applied[0] = static_cast<double>(a);
  next[0] = static_cast<double>(t + 1) / horizon();
  next[1] = static_cast<double>(edges[e].child);
  return edges[e].cost;
}

FiniteTreeMdp example_tree() { return FiniteTreeMdp::load(data_file("example_tree.txt")); }

}  // namespace dynrisk
