#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace dynrisk {

struct OracleCheck {
  std::string suite;
  std::string name;
  bool passed = false;
  double value = 0.0;
  double expected = 0.0;
  double tolerance = 0.0;
  std::string detail;
};

/**
 * Self-contained checks behind `dynrisk oracle`:
 *   tree  two-period example: static value, dynamic and precommitted plans
 *   cvar  coherence identities and route agreement on random samples
 *   grad  reverse-mode gradients against central differences (MLP, critic
 *         and actor losses for one- and two-atom spectra)
 *   all   the three above
 */
std::vector<OracleCheck> run_oracle_suite(const std::string& suite, std::uint64_t seed = 1);

std::vector<std::string> oracle_suite_names();

}  // namespace dynrisk
