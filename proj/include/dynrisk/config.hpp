#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "dynrisk/actor.hpp"
#include "dynrisk/critic.hpp"
#include "dynrisk/nested_baseline.hpp"
#include "dynrisk/portfolio.hpp"
#include "dynrisk/spectrum.hpp"
#include "dynrisk/statarb.hpp"

namespace dynrisk {

/// Fully resolved run description. Every field has a key in the INI grammar
/// documented in docs/config.md; to_ini() writes all of them back.
struct RunConfig {
  // [run]
  std::string method = "elicitable";  // elicitable | nested
  std::uint64_t seed = 1;
  int iterations = 1500;
  std::size_t threads = 1;
  std::string output = "runs/default";
  int snapshot_interval = 0;  // iterations between policy-grid snapshots; 0 = off

  // [env]
  std::string env = "statarb";  // statarb | portfolio | vecm | constant | tree
  StatArbSpec statarb;
  PortfolioSpec portfolio;
  std::string vecm_file;  // empty = bundled estimates
  int vecm_T = 24;
  int vecm_steps_per_period = 10;
  bool vecm_riskfree = false;
  int constant_T = 3;
  double constant_cost = 1.0;
  std::string tree_file;  // empty = bundled two-period example
  std::vector<double> tree_initial;

  // [risk]
  Spectrum spectrum = Spectrum::cvar(0.5);
  double cost_bound = 0.0;  // 0 = environment default

  // [policy]
  std::size_t policy_hidden = 16;
  std::size_t policy_depth = 5;
  double log_std_init = -0.69314718055994531;  // log 0.5

  // [critic]
  std::string critic_model = "network";  // network | exact (tree only)
  std::size_t critic_hidden = 16;
  std::size_t critic_depth = 5;
  CriticConfig critic;

  // [actor]
  ActorConfig actor;

  // [nested]
  std::size_t inner_M = 100;

  // [eval]
  std::size_t eval_episodes = 10000;
  std::size_t grid_points = 21;

  void validate() const;
  std::string to_ini() const;
};

RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

/// Presets mirroring the hyperparameter tables; `name` is statarb | portfolio
/// | vecm. The result is what an empty config for that environment resolves to.
RunConfig preset(const std::string& name);

std::unique_ptr<Environment> make_environment(const RunConfig& config);
std::unique_ptr<Policy> make_policy(const RunConfig& config, const Environment& env, Rng& rng);
/// Configured C, or the environment default when cost_bound = 0.
double resolve_cost_bound(const RunConfig& config, const Environment& env);

}  // namespace dynrisk
