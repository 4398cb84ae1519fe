#pragma once

#include <cstdint>
#include <random>

namespace dynrisk {

/// SplitMix64 finalizer; used to derive independent substream seeds.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// Seed of substream `stream` under `seed`, e.g. episode b of a batch.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept;

/// Random source handed to simulators and policies. Deterministic given its
/// seed; not shared between threads.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }
  std::mt19937_64& engine() noexcept { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace dynrisk
