#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace dynrisk {

/// lr(e) = max(floor, initial * decay^floor(e / interval)).
struct LrSchedule {
  double initial = 4e-3;
  double decay = 0.95;
  int interval = 50;
  double floor = 5e-4;

  double at(std::int64_t epoch) const;
  /// First epoch whose rate equals the floor.
  std::int64_t floor_epoch() const;
};

/// Adam with bias correction. One instance per parameter vector.
class Adam {
 public:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;

  Adam() = default;
  Adam(std::size_t n, LrSchedule schedule);

  /// Applies one update at the current schedule rate. Zero gradients leave the
  /// parameters unchanged.
  void step(std::span<double> params, std::span<const double> grad);
  /// Advances the schedule by one epoch.
  void end_epoch() { ++epoch_; }

  double learning_rate() const { return schedule_.at(epoch_); }
  std::int64_t steps() const { return steps_; }
  std::int64_t epoch() const { return epoch_; }
  const LrSchedule& schedule() const { return schedule_; }
  const std::vector<double>& first_moment() const { return m_; }
  const std::vector<double>& second_moment() const { return v_; }

  /// Restores a saved state (checkpoint loading).
  void restore(std::vector<double> m, std::vector<double> v, std::int64_t steps,
               std::int64_t epoch);

 private:
  LrSchedule schedule_;
  std::vector<double> m_, v_;
  std::int64_t steps_ = 0;
  std::int64_t epoch_ = 0;
};

}  // namespace dynrisk
