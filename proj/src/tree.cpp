#include "dynrisk/tree.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>

#include "dynrisk/empirical.hpp"

namespace dynrisk {

namespace {
constexpr double kTieTolerance = 1e-12;
}

FiniteTreeMdp::FiniteTreeMdp(int horizon, std::vector<TreeNode> nodes)
    : horizon_(horizon), nodes_(std::move(nodes)) {
  validate();
}

void FiniteTreeMdp::validate() const {
  if (horizon_ < 1) throw TreeStructureError("tree depth must be at least 1");
  if (nodes_.empty()) throw TreeStructureError("tree has no nodes");
  for (std::size_t id = 0; id < nodes_.size(); ++id) {
    const auto& n = nodes_[id];
    const auto where = "node " + std::to_string(id);
    if (n.depth < 0 || n.depth > horizon_) throw TreeStructureError(where + " has depth outside [0,T]");
    if (n.is_leaf() && n.depth != horizon_) {
      throw TreeStructureError(where + " is a leaf above depth T");
    }
    if (!n.is_leaf() && n.depth == horizon_) {
      throw TreeStructureError(where + " at depth T has outgoing edges");
    }
    for (std::size_t a = 0; a < n.actions.size(); ++a) {
      const auto& edges = n.actions[a];
      if (edges.empty()) {
        throw TreeStructureError(where + " action " + std::to_string(a) + " has no outcomes");
      }
      double total = 0.0;
      for (const auto& e : edges) {
        if (e.child >= nodes_.size()) throw TreeStructureError(where + " points to a missing node");
        if (nodes_[e.child].depth != n.depth + 1) {
          throw TreeStructureError(where + " has an edge that does not advance depth by one");
        }
        if (!(e.probability > 0.0 && e.probability <= 1.0)) {
          throw TreeStructureError(where + " has an edge probability outside (0,1]");
        }
        if (!std::isfinite(e.cost)) throw TreeStructureError(where + " has a non-finite cost");
        total += e.probability;
      }
      if (std::abs(total - 1.0) > 1e-12) {
        throw TreeStructureError(where + " action " + std::to_string(a) +
                                 " probabilities do not sum to 1");
      }
    }
  }
  if (roots().empty()) throw TreeStructureError("tree has no depth-0 node");
}

std::vector<std::size_t> FiniteTreeMdp::roots() const {
  std::vector<std::size_t> out;
  for (std::size_t id = 0; id < nodes_.size(); ++id) {
    if (nodes_[id].depth == 0) out.push_back(id);
  }
  return out;
}

std::size_t FiniteTreeMdp::max_actions() const noexcept {
  std::size_t m = 0;
  for (const auto& n : nodes_) m = std::max(m, n.actions.size());
  return m;
}

FiniteTreeMdp FiniteTreeMdp::parse(std::istream& in) {
  int horizon = -1;
  std::vector<TreeNode> nodes;
  std::vector<bool> declared;
  std::string line;
  int line_no = 0;
  auto fail = [&](const std::string& msg) {
    throw TreeStructureError("line " + std::to_string(line_no) + ": " + msg);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string kind;
    if (!(ls >> kind)) continue;
    if (kind == "depth") {
      if (!(ls >> horizon)) fail("expected 'depth <T>'");
    } else if (kind == "node") {
      std::size_t id;
      int depth;
      if (!(ls >> id >> depth)) fail("expected 'node <id> <depth>'");
      if (id >= nodes.size()) {
        nodes.resize(id + 1);
        declared.resize(id + 1, false);
      }
      if (declared[id]) fail("node " + std::to_string(id) + " declared twice");
      declared[id] = true;
      nodes[id].depth = depth;
    } else if (kind == "edge") {
      std::size_t from, action, to;
      TreeEdge e;
      if (!(ls >> from >> action >> to >> e.probability >> e.cost)) {
        fail("expected 'edge <from> <action> <to> <probability> <cost>'");
      }
      if (from >= nodes.size() || !declared[from]) fail("edge from undeclared node");
      e.child = to;
      auto& acts = nodes[from].actions;
      if (action >= acts.size()) acts.resize(action + 1);
      acts[action].push_back(e);
    } else {
      fail("unknown record '" + kind + "'");
    }
  }
  if (horizon < 0) throw TreeStructureError("missing 'depth' record");
  for (std::size_t id = 0; id < declared.size(); ++id) {
    if (!declared[id]) throw TreeStructureError("node " + std::to_string(id) + " never declared");
  }
  return FiniteTreeMdp(horizon, std::move(nodes));
}

FiniteTreeMdp FiniteTreeMdp::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw TreeStructureError("cannot open tree file " + path.string());
  return parse(in);
}

namespace {

// Nodes ordered deepest first so children are solved before parents.
std::vector<std::size_t> bottom_up_order(const FiniteTreeMdp& mdp) {
  std::vector<std::size_t> order(mdp.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return mdp.node(a).depth > mdp.node(b).depth;
  });
  return order;
}

}  // namespace

TreeSolution tree_dynamic_risk(const FiniteTreeMdp& mdp, const Spectrum& spectrum) {
  TreeSolution sol;
  sol.value.assign(mdp.size(), 0.0);
  sol.action.assign(mdp.size(), -1);
  std::vector<double> values, probs;
  for (auto id : bottom_up_order(mdp)) {
    const auto& n = mdp.node(id);
    if (n.is_leaf()) continue;
    double best = 0.0;
    for (std::size_t a = 0; a < n.actions.size(); ++a) {
      values.clear();
      probs.clear();
      for (const auto& e : n.actions[a]) {
        values.push_back(e.cost + sol.value[e.child]);
        probs.push_back(e.probability);
      }
      const double risk = weighted_spectral(values, probs, spectrum);
      if (sol.action[id] < 0 || risk < best - kTieTolerance) {
        best = risk;
        sol.action[id] = static_cast<int>(a);
      }
    }
    sol.value[id] = best;
  }
  return sol;
}

std::vector<TreeRiskLevels> tree_policy_risk(const FiniteTreeMdp& mdp,
                                             const std::vector<std::vector<double>>& probs,
                                             const Spectrum& spectrum) {
  if (probs.size() != mdp.size()) {
    throw std::invalid_argument("policy table must have one row per tree node");
  }
  std::vector<TreeRiskLevels> out(mdp.size());
  for (auto& r : out) r.var_levels.assign(spectrum.size(), 0.0);
  std::vector<double> values, weights;
  for (auto id : bottom_up_order(mdp)) {
    const auto& n = mdp.node(id);
    if (n.is_leaf()) continue;
    if (probs[id].size() < n.actions.size()) {
      throw std::invalid_argument("policy row too short for node " + std::to_string(id));
    }
    values.clear();
    weights.clear();
    for (std::size_t a = 0; a < n.actions.size(); ++a) {
      for (const auto& e : n.actions[a]) {
        values.push_back(e.cost + out[e.child].value);
        weights.push_back(probs[id][a] * e.probability);
      }
    }
    auto risk = weighted_risk(values, weights, spectrum);
    out[id].var_levels = std::move(risk.var_levels);
    out[id].value = risk.risk;
  }
  return out;
}

void plan_cost_distribution(const FiniteTreeMdp& mdp, const std::vector<int>& plan,
                            std::size_t root, std::vector<double>& values,
                            std::vector<double>& probs) {
  values.clear();
  probs.clear();
  std::function<void(std::size_t, double, double)> walk = [&](std::size_t id, double prob,
                                                              double cost) {
    const auto& n = mdp.node(id);
    if (n.is_leaf()) {
      values.push_back(cost);
      probs.push_back(prob);
      return;
    }
    const int a = plan.at(id);
    if (a < 0 || static_cast<std::size_t>(a) >= n.actions.size()) {
      throw std::invalid_argument("plan has no valid action at node " + std::to_string(id));
    }
    for (const auto& e : n.actions[static_cast<std::size_t>(a)]) {
      walk(e.child, prob * e.probability, cost + e.cost);
    }
  };
  walk(root, 1.0, 0.0);
}

PlanResult static_precommitment(const FiniteTreeMdp& mdp, const Spectrum& spectrum,
                                std::size_t root) {
  // Decision nodes reachable from root under any plan.
  std::vector<std::size_t> decision;
  std::vector<bool> seen(mdp.size(), false);
  std::vector<std::size_t> stack{root};
  while (!stack.empty()) {
    const auto id = stack.back();
    stack.pop_back();
    if (seen[id]) continue;
    seen[id] = true;
    const auto& n = mdp.node(id);
    if (n.is_leaf()) continue;
    decision.push_back(id);
    for (const auto& edges : n.actions) {
      for (const auto& e : edges) stack.push_back(e.child);
    }
  }
  std::sort(decision.begin(), decision.end());

  PlanResult best;
  bool have = false;
  std::vector<int> plan(mdp.size(), -1);
  for (auto id : decision) plan[id] = 0;
  std::vector<double> values, probs;
  while (true) {
    plan_cost_distribution(mdp, plan, root, values, probs);
    const double risk = weighted_spectral(values, probs, spectrum);
    if (!have || risk < best.value - kTieTolerance) {
      best.value = risk;
      best.plan = plan;
      have = true;
    }
    // Odometer over decision nodes, last node fastest: lexicographic order.
    std::size_t i = decision.size();
    while (i > 0) {
      --i;
      const auto id = decision[i];
      if (static_cast<std::size_t>(plan[id]) + 1 < mdp.node(id).actions.size()) {
        ++plan[id];
        break;
      }
      plan[id] = 0;
      if (i == 0) return best;
    }
    if (decision.empty()) return best;
  }
}

}  // namespace dynrisk
