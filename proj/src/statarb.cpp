#include "dynrisk/statarb.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dynrisk {

double StatArbSpec::stationary_sd() const { return sigma / std::sqrt(2.0 * kappa); }

double StatArbSpec::default_cost_bound() const {
  return 4.0 * (a_max * T * (mu + 3.0 * sigma) + q_max * q_max * phi2);
}

void StatArbSpec::validate() const {
  auto fail = [](const std::string& m) { throw std::invalid_argument("statarb: " + m); };
  if (T < 1) fail("T must be >= 1");
  if (!(kappa > 0.0)) fail("kappa must be > 0");
  if (sigma < 0.0) fail("sigma must be >= 0");
  if (!(q_min < q_max)) fail("q_min must be < q_max");
  if (!(a_min < a_max)) fail("a_min must be < a_max");
  if (phi1 < 0.0 || phi2 < 0.0) fail("phi1 and phi2 must be >= 0");
  if (q0_spread < 0.0) fail("q0_spread must be >= 0");
}

double ou_step(double s, const StatArbSpec& spec, double z) {
  const double dt = spec.step_length();
  const double decay = std::exp(-spec.kappa * dt);
  const double sd = spec.sigma * std::sqrt(-std::expm1(-2.0 * spec.kappa * dt) / (2.0 * spec.kappa));
  return spec.mu + (s - spec.mu) * decay + sd * z;
}

StatArbEnv::StatArbEnv(StatArbSpec spec) : spec_(spec) { spec_.validate(); }

double StatArbEnv::trade_from_raw(double raw) const {
  const double s = raw >= 0.0 ? 1.0 / (1.0 + std::exp(-raw)) : std::exp(raw) / (1.0 + std::exp(raw));
  return spec_.a_min + (spec_.a_max - spec_.a_min) * s;
}

double StatArbEnv::raw_for_trade(double a) const {
  const double u = (a - spec_.a_min) / (spec_.a_max - spec_.a_min);
  if (!(u > 0.0 && u < 1.0)) throw std::invalid_argument("trade outside (a_min, a_max)");
  return std::log(u / (1.0 - u));
}

InputAffine StatArbEnv::input_affine() const {
  const double sd = spec_.stationary_sd();
  const double qs = std::max(std::abs(spec_.q_min), std::abs(spec_.q_max));
  return {{0.0, spec_.mu, 0.0}, {1.0, sd > 0.0 ? 1.0 / sd : 1.0, qs > 0.0 ? 1.0 / qs : 1.0}};
}

void StatArbEnv::initial_state(Rng& rng, std::span<double> state) const {
  state[0] = 0.0;
  state[1] = spec_.mu + spec_.stationary_sd() * rng.normal();
  double q = 0.0;
  if (spec_.q0_spread > 0.0) {
    q = std::clamp(spec_.q0_spread * (2.0 * rng.uniform() - 1.0), spec_.q_min, spec_.q_max);
  }
  state[2] = q;
}

double StatArbEnv::step(int t, std::span<const double> state, std::span<const double> raw,
                        Rng& rng, std::span<double> next, std::span<double> applied) const {
  double trade = 0.0;
  const double cost = step_with(t, state, raw[0], rng.normal(), next, trade);
  applied[0] = trade;
  return cost;
}

double StatArbEnv::step_with(int t, std::span<const double> state, double raw, double z,
                             std::span<double> next, double& trade) const {
  const double S = state[1];
  const double q = state[2];
  const double q_next = std::clamp(q + trade_from_raw(raw), spec_.q_min, spec_.q_max);
  trade = q_next - q;
  double cost = trade * S + trade * trade * spec_.phi1;
  const double S_next = ou_step(S, spec_, z);
  if (t == spec_.T - 1) cost -= q_next * S_next - q_next * q_next * spec_.phi2;
  next[0] = static_cast<double>(t + 1) / spec_.T;
  next[1] = S_next;
  next[2] = q_next;
  return cost;
}

}  // namespace dynrisk
