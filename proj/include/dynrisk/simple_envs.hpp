#pragma once

#include <span>
#include <vector>

#include "dynrisk/environment.hpp"
#include "dynrisk/tree.hpp"

namespace dynrisk {

/// Every period costs the same constant. State (t/T, u) with u ~ U(-1, 1)
/// redrawn each period as an uninformative feature; the single raw action is
/// ignored.
class ConstantCostEnv final : public Environment {
 public:
  ConstantCostEnv(int T, double cost);

  std::string kind() const override { return "constant"; }
  int horizon() const override { return T_; }
  std::size_t state_dim() const override { return 2; }
  std::size_t raw_action_dim() const override { return 1; }
  std::size_t applied_action_dim() const override { return 1; }

  void initial_state(Rng& rng, std::span<double> state) const override;
  double step(int t, std::span<const double> state, std::span<const double> raw, Rng& rng,
              std::span<double> next, std::span<double> applied) const override;

  double cost() const { return cost_; }

 private:
  int T_;
  double cost_;
};

/**
 * A FiniteTreeMdp as an episodic environment. State (t/T, node id); the raw
 * action is an action index. The initial node is drawn from `initial`
 * (probabilities over the depth-0 nodes in id order).
 */
class TreeEnv final : public Environment {
 public:
  explicit TreeEnv(FiniteTreeMdp mdp, std::vector<double> initial = {});

  std::string kind() const override { return "tree"; }
  int horizon() const override { return mdp_.horizon(); }
  std::size_t state_dim() const override { return 2; }
  std::size_t raw_action_dim() const override { return 1; }
  std::size_t applied_action_dim() const override { return 1; }

  void initial_state(Rng& rng, std::span<double> state) const override;
  double step(int t, std::span<const double> state, std::span<const double> raw, Rng& rng,
              std::span<double> next, std::span<double> applied) const override;

  const FiniteTreeMdp& mdp() const { return mdp_; }
  const std::vector<std::size_t>& roots() const { return roots_; }
  const std::vector<double>& initial_distribution() const { return initial_; }

 private:
  FiniteTreeMdp mdp_;
  std::vector<std::size_t> roots_;
  std::vector<double> initial_;
};

/// The two-period example tree bundled in data/example_tree.txt.
FiniteTreeMdp example_tree();

}  // namespace dynrisk
