#pragma once

#include <filesystem>
#include <istream>
#include <stdexcept>
#include <vector>

#include "dynrisk/spectrum.hpp"

namespace dynrisk {

class TreeStructureError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TreeEdge {
  std::size_t child = 0;
  double probability = 0.0;
  double cost = 0.0;
};

/// A decision node: each action leads to a chance distribution over children.
/// Leaves have no actions.
struct TreeNode {
  int depth = 0;
  std::vector<std::vector<TreeEdge>> actions;
  bool is_leaf() const noexcept { return actions.empty(); }
};

/**
 * Finite-horizon decision tree. Nodes at depth 0 are possible initial states;
 * every leaf sits at depth `horizon`.
 *
 * Text format (one record per line, '#' starts a comment):
 *
 *   depth <T>
 *   node <id> <depth>
 *   edge <from> <action> <to> <probability> <cost>
 */
class FiniteTreeMdp {
 public:
  FiniteTreeMdp(int horizon, std::vector<TreeNode> nodes);

  static FiniteTreeMdp parse(std::istream& in);
  static FiniteTreeMdp load(const std::filesystem::path& path);

  int horizon() const noexcept { return horizon_; }
  std::size_t size() const noexcept { return nodes_.size(); }
  const TreeNode& node(std::size_t id) const { return nodes_.at(id); }
  const std::vector<TreeNode>& nodes() const noexcept { return nodes_; }
  std::vector<std::size_t> roots() const;
  std::size_t max_actions() const noexcept;

 private:
  void validate() const;

  int horizon_;
  std::vector<TreeNode> nodes_;
};

/// Per-node dynamic risk and the minimizing action (-1 at leaves).
struct TreeSolution {
  std::vector<double> value;
  std::vector<int> action;
};

/// Backward induction with the one-step spectral risk applied exactly at every
/// node. Ties within 1e-12 resolve to the lowest action index.
TreeSolution tree_dynamic_risk(const FiniteTreeMdp& mdp, const Spectrum& spectrum);

/// Dynamic risk of a fixed randomized policy: probs[node][action].
struct TreeRiskLevels {
  std::vector<double> var_levels;
  double value = 0.0;
};
std::vector<TreeRiskLevels> tree_policy_risk(const FiniteTreeMdp& mdp,
                                             const std::vector<std::vector<double>>& probs,
                                             const Spectrum& spectrum);

/// Static (precommitment) optimum: the pure plan minimizing the spectral risk
/// of the total cost from `root`. plan[node] is the action chosen at each
/// decision node reachable from root (-1 elsewhere).
struct PlanResult {
  std::vector<int> plan;
  double value = 0.0;
};
PlanResult static_precommitment(const FiniteTreeMdp& mdp, const Spectrum& spectrum,
                                std::size_t root = 0);

/// Terminal-cost distribution of a pure plan from `root`.
void plan_cost_distribution(const FiniteTreeMdp& mdp, const std::vector<int>& plan,
                            std::size_t root, std::vector<double>& values,
                            std::vector<double>& probs);

}  // namespace dynrisk
