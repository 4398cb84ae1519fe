#include "dynrisk/environment.hpp"

#include <stdexcept>
#include <vector>

#include "dynrisk/policy.hpp"

namespace dynrisk {

EpisodeBatch::EpisodeBatch(const Environment& env, std::size_t n)
    : episodes(n), horizon(env.horizon()) {
  const auto T = static_cast<Eigen::Index>(horizon);
  const auto B = static_cast<Eigen::Index>(n);
  states = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(env.state_dim()), B * (T + 1));
  raw_actions = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(env.raw_action_dim()), B * T);
  actions = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(env.applied_action_dim()), B * T);
  costs = Eigen::VectorXd::Zero(B * T);
}

Eigen::MatrixXd EpisodeBatch::decision_states() const {
  Eigen::MatrixXd out(states.rows(), static_cast<Eigen::Index>(transitions()));
  for (std::size_t b = 0; b < episodes; ++b) {
    for (int t = 0; t < horizon; ++t) {
      out.col(static_cast<Eigen::Index>(step_col(b, t))) =
          states.col(static_cast<Eigen::Index>(state_col(b, t)));
    }
  }
  return out;
}

Eigen::MatrixXd EpisodeBatch::next_states() const {
  Eigen::MatrixXd out(states.rows(), static_cast<Eigen::Index>(transitions()));
  for (std::size_t b = 0; b < episodes; ++b) {
    for (int t = 0; t < horizon; ++t) {
      out.col(static_cast<Eigen::Index>(step_col(b, t))) =
          states.col(static_cast<Eigen::Index>(state_col(b, t + 1)));
    }
  }
  return out;
}

bool EpisodeBatch::operator==(const EpisodeBatch& o) const {
  return episodes == o.episodes && horizon == o.horizon && states == o.states &&
         raw_actions == o.raw_actions && actions == o.actions && costs == o.costs;
}

void simulate_episode(const Environment& env, const Policy& policy, Rng& rng,
                      EpisodeBatch& batch, std::size_t b) {
  if (policy.state_dim() != env.state_dim() || policy.action_dim() != env.raw_action_dim()) {
    throw std::invalid_argument("policy dimensions do not match environment " + env.kind());
  }
  const int T = env.horizon();
  std::vector<double> state(env.state_dim()), next(env.state_dim());
  std::vector<double> raw(env.raw_action_dim()), applied(env.applied_action_dim());
  env.initial_state(rng, state);
  auto put_state = [&](int t, const std::vector<double>& s) {
    const auto c = static_cast<Eigen::Index>(batch.state_col(b, t));
    for (std::size_t i = 0; i < s.size(); ++i) batch.states(static_cast<Eigen::Index>(i), c) = s[i];
  };
  put_state(0, state);
  for (int t = 0; t < T; ++t) {
    policy.sample(state, rng, raw);
    const double cost = env.step(t, state, raw, rng, next, applied);
    const auto c = static_cast<Eigen::Index>(batch.step_col(b, t));
    for (std::size_t i = 0; i < raw.size(); ++i) batch.raw_actions(static_cast<Eigen::Index>(i), c) = raw[i];
    for (std::size_t i = 0; i < applied.size(); ++i) batch.actions(static_cast<Eigen::Index>(i), c) = applied[i];
    batch.costs(c) = cost;
    put_state(t + 1, next);
    state.swap(next);
  }
}

EpisodeBatch simulate_batch(const Environment& env, const Policy& policy, std::size_t episodes,
                            std::uint64_t seed, std::size_t threads) {
  if (episodes == 0) throw std::invalid_argument("simulate_batch needs at least one episode");
  EpisodeBatch batch(env, episodes);
  parallel_for(episodes, threads, [&](std::size_t b) {
    Rng rng(derive_seed(seed, b));
    simulate_episode(env, policy, rng, batch, b);
  });
  return batch;
}

}  // namespace dynrisk
