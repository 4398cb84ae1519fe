#include "dynrisk/nested_baseline.hpp"

#include <cmath>
#include <stdexcept>

#include "dynrisk/empirical.hpp"
#include "dynrisk/nested_oracle.hpp"

namespace dynrisk {

NestedTargets nested_targets(const Environment& env, const Policy& policy,
                             const EpisodeBatch& batch, const Mlp& value_target,
                             const Spectrum& spectrum, std::size_t inner_M, std::uint64_t seed,
                             std::size_t threads) {
  if (inner_M < 2) throw std::invalid_argument("nested targets need inner_M >= 2");
  const auto N = static_cast<Eigen::Index>(batch.transitions());
  const auto M = static_cast<Eigen::Index>(spectrum.size());
  NestedTargets out{Eigen::VectorXd(N), Eigen::MatrixXd(M, N),
                    static_cast<std::uint64_t>(N) * (inner_M - 1)};
  const int T = batch.horizon;
  Eigen::VectorXd realized_next = Eigen::VectorXd::Zero(N);
  if (T > 1) realized_next = value_target.forward(batch.next_states()).row(0).transpose();

  parallel_for(batch.episodes, threads, [&](std::size_t b) {
    const std::size_t fresh = inner_M - 1;
    std::vector<double> state(env.state_dim()), next(env.state_dim());
    std::vector<double> raw(env.raw_action_dim()), applied(env.applied_action_dim());
    Eigen::MatrixXd next_states(static_cast<Eigen::Index>(env.state_dim()),
                                static_cast<Eigen::Index>(fresh));
    std::vector<double> z(inner_M);
    for (int t = 0; t < T; ++t) {
      const auto n = static_cast<Eigen::Index>(batch.step_col(b, t));
      const auto sc = static_cast<Eigen::Index>(batch.state_col(b, t));
      for (std::size_t i = 0; i < state.size(); ++i) state[i] = batch.states(static_cast<Eigen::Index>(i), sc);
      const bool last = t + 1 == T;
      z[0] = batch.costs(n) + (last ? 0.0 : realized_next(n));
      Rng rng(derive_seed(seed, static_cast<std::uint64_t>(n)));
      for (std::size_t j = 0; j < fresh; ++j) {
        policy.sample(state, rng, raw);
        z[j + 1] = env.step(t, state, raw, rng, next, applied);
        for (std::size_t i = 0; i < next.size(); ++i) {
          next_states(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = next[i];
        }
      }
      if (!last) {
        const Eigen::MatrixXd v = value_target.forward(next_states);
        for (std::size_t j = 0; j < fresh; ++j) z[j + 1] += v(0, static_cast<Eigen::Index>(j));
      }
      const WeightedRisk r = empirical_risk(z, spectrum);
      out.risk(n) = r.risk;
      for (Eigen::Index m = 0; m < M; ++m) out.var_levels(m, n) = r.var_levels[static_cast<std::size_t>(m)];
    }
  });
  return out;
}

double nested_critic_loss(const Mlp& value, const EpisodeBatch& batch,
                          const Eigen::VectorXd& targets, std::vector<double>* grad) {
  MlpTape tape;
  const Eigen::MatrixXd v = value.forward(batch.decision_states(), grad ? &tape : nullptr);
  const Eigen::RowVectorXd diff = v.row(0) - targets.transpose();
  if (grad) {
    grad->assign(value.num_parameters(), 0.0);
    const Eigen::MatrixXd d = 2.0 * diff;
    value.backward(tape, d, *grad);
  }
  return diff.squaredNorm();
}

NestedValue::NestedValue(Spectrum spectrum, std::size_t state_dim, std::size_t hidden,
                         std::size_t depth, Rng& rng, const InputAffine& affine)
    : spectrum_(std::move(spectrum)),
      net_(mlp_layout(state_dim, hidden, depth, 1), OutputActivation::identity()) {
  net_.init_glorot(rng);
  net_.set_input_affine(affine);
  target_ = net_;
}

NestedValue::NestedValue(Spectrum spectrum, Mlp net)
    : spectrum_(std::move(spectrum)), net_(std::move(net)), target_(net_) {
  if (net_.output_dim() != 1) throw std::invalid_argument("nested value net must have one output");
}

ValueOutput NestedValue::evaluate(const Eigen::MatrixXd& states) const {
  ValueOutput out;
  out.value = net_.forward(states).row(0).transpose();
  out.var_levels = out.value.transpose().replicate(static_cast<Eigen::Index>(spectrum_.size()), 1);
  return out;
}

NestedCriticTrainer::NestedCriticTrainer(NestedValue& value, NestedConfig config,
                                         std::uint64_t seed)
    : value_(value), config_(config), seed_(seed), opt_(value.net().num_parameters(), config.lr) {
  if (config_.target_interval < 1) throw std::invalid_argument("target interval must be >= 1");
  if (config_.inner_M < 2) throw std::invalid_argument("nested inner_M must be >= 2");
}

std::vector<LossTraceRow> NestedCriticTrainer::train(const Environment& env, const Policy& policy,
                                                     std::int64_t iteration,
                                                     TransitionCounter* counter) {
  std::vector<LossTraceRow> trace;
  std::vector<double> grad;
  for (int k1 = 1; k1 <= config_.epochs; ++k1) {
    const std::uint64_t stream = derive_seed(seed_, epochs_);
    const EpisodeBatch batch = simulate_batch(env, policy, config_.batch, stream, config_.threads);
    const NestedTargets targets =
        nested_targets(env, policy, batch, value_.target(), value_.spectrum(), config_.inner_M,
                       derive_seed(stream, 0x696e6e6572ULL), config_.threads);
    if (counter) {
      counter->outer += batch.transitions();
      counter->inner += targets.fresh_transitions;
    }
    const double lr = opt_.learning_rate();
    const double loss = nested_critic_loss(value_.net(), batch, targets.risk, &grad);
    if (!std::isfinite(loss)) {
      throw NumericalError("nested critic loss is not finite at iteration " +
                           std::to_string(iteration) + ", epoch " + std::to_string(k1));
    }
    value_.net().check_finite(grad, "nested value net");
    opt_.step(value_.net().parameters(), grad);
    opt_.end_epoch();
    if (k1 % config_.target_interval == 0) value_.sync_target();
    trace.push_back({"critic", iteration, k1, loss, lr});
    ++epochs_;
  }
  return trace;
}

NestedActorTrainer::NestedActorTrainer(Policy& policy, ActorConfig config, std::size_t inner_M,
                                       std::uint64_t seed)
    : policy_(policy),
      config_(config),
      inner_M_(inner_M),
      seed_(seed),
      opt_(policy.num_parameters(), config.lr) {
  if (inner_M_ < 2) throw std::invalid_argument("nested inner_M must be >= 2");
}

std::vector<LossTraceRow> NestedActorTrainer::train(const Environment& env,
                                                    const NestedValue& value,
                                                    std::int64_t iteration,
                                                    TransitionCounter* counter) {
  std::vector<LossTraceRow> trace;
  const std::size_t episodes = config_.effective_batch(value.spectrum());
  std::vector<double> grad;
  for (int k2 = 1; k2 <= config_.epochs; ++k2) {
    const std::uint64_t stream = derive_seed(seed_, epochs_);
    const EpisodeBatch batch = simulate_batch(env, policy_, episodes, stream, config_.threads);
    const NestedTargets inner =
        nested_targets(env, policy_, batch, value.net(), value.spectrum(), inner_M_,
                       derive_seed(stream, 0x696e6e6572ULL), config_.threads);
    if (counter) {
      counter->outer += batch.transitions();
      counter->inner += inner.fresh_transitions;
    }
    Eigen::VectorXd next = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(batch.transitions()));
    if (batch.horizon > 1) next = value.evaluate(batch.next_states()).value;
    const Eigen::VectorXd w = saddle_weights(value.spectrum(), batch, inner.var_levels, next);
    const double lr = opt_.learning_rate();
    const double loss = weighted_log_prob_loss(policy_, batch, w, &grad);
    if (!std::isfinite(loss)) {
      throw NumericalError("nested actor loss is not finite at iteration " +
                           std::to_string(iteration) + ", epoch " + std::to_string(k2));
    }
    std::vector<double> params = policy_.parameters();
    opt_.step(params, grad);
    opt_.end_epoch();
    policy_.set_parameters(params);
    trace.push_back({"actor", iteration, k2, loss, lr});
    ++epochs_;
  }
  return trace;
}

}  // namespace dynrisk
