#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "dynrisk/adam.hpp"
#include "dynrisk/mlp.hpp"
#include "dynrisk/policy.hpp"

namespace dynrisk {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/**
 * Plain-text key/value record. Numbers are written as C99 hex floats, so a
 * save/load cycle reproduces every double bit for bit.
 *
 *   dynrisk-checkpoint <version>
 *   s <key> <text>
 *   a <key> <n> <hexfloat> ...
 *   config <line count>
 *   <verbatim config lines>
 */
class Checkpoint {
 public:
  static constexpr int kVersion = 1;

  void set(const std::string& key, const std::string& value);
  void set_int(const std::string& key, std::int64_t value);
  void set_array(const std::string& key, std::vector<double> values);

  bool has(const std::string& key) const;
  const std::string& get(const std::string& key) const;
  std::int64_t get_int(const std::string& key) const;
  const std::vector<double>& get_array(const std::string& key) const;

  std::string config_text;

  void save(const std::filesystem::path& path) const;
  static Checkpoint load(const std::filesystem::path& path);

  bool operator==(const Checkpoint&) const = default;

 private:
  std::map<std::string, std::string> scalars_;
  std::map<std::string, std::vector<double>> arrays_;
};

void store_mlp(Checkpoint& ck, const std::string& prefix, const Mlp& net);
Mlp load_mlp(const Checkpoint& ck, const std::string& prefix);

void store_adam(Checkpoint& ck, const std::string& prefix, const Adam& opt);
/// Restores moments and counters into an optimizer built with the run's schedule.
void load_adam(const Checkpoint& ck, const std::string& prefix, Adam& opt);

/// Gaussian and tabular-softmax policies are serializable.
void store_policy(Checkpoint& ck, const std::string& prefix, const Policy& policy);
std::unique_ptr<Policy> load_policy(const Checkpoint& ck, const std::string& prefix);

}  // namespace dynrisk
