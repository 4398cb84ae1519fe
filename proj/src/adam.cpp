#include "dynrisk/adam.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dynrisk {

double LrSchedule::at(std::int64_t epoch) const {
  const auto k = interval > 0 ? epoch / interval : 0;
  return std::max(floor, initial * std::pow(decay, static_cast<double>(k)));
}

std::int64_t LrSchedule::floor_epoch() const {
  if (initial <= floor) return 0;
  if (decay >= 1.0 || interval <= 0) return -1;
  std::int64_t k = 0;
  while (initial * std::pow(decay, static_cast<double>(k)) > floor) ++k;
  return k * interval;
}

Adam::Adam(std::size_t n, LrSchedule schedule)
    : schedule_(schedule), m_(n, 0.0), v_(n, 0.0) {
  if (!(schedule.initial > 0.0) || schedule.floor < 0.0 || schedule.floor > schedule.initial ||
      !(schedule.decay > 0.0 && schedule.decay <= 1.0)) {
    throw std::invalid_argument("invalid learning-rate schedule");
  }
}

void Adam::step(std::span<double> params, std::span<const double> grad) {
  if (params.size() != m_.size() || grad.size() != m_.size()) {
    throw std::invalid_argument("Adam: size mismatch");
  }
  ++steps_;
  const double lr = learning_rate();
  const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(steps_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = kBeta1 * m_[i] + (1.0 - kBeta1) * grad[i];
    v_[i] = kBeta2 * v_[i] + (1.0 - kBeta2) * grad[i] * grad[i];
    const double m_hat = m_[i] / c1;
    const double v_hat = v_[i] / c2;
    params[i] -= lr * m_hat / (std::sqrt(v_hat) + kEps);
  }
}

void Adam::restore(std::vector<double> m, std::vector<double> v, std::int64_t steps,
                   std::int64_t epoch) {
  if (m.size() != m_.size() || v.size() != v_.size()) {
    throw std::invalid_argument("Adam: restored state size mismatch");
  }
  m_ = std::move(m);
  v_ = std::move(v);
  steps_ = steps;
  epoch_ = epoch;
}

}  // namespace dynrisk
