#include "dynrisk/actor.hpp"

#include <cmath>
#include <stdexcept>

namespace dynrisk {

std::size_t ActorConfig::effective_batch(const Spectrum& spectrum) const {
  const double n = static_cast<double>(base_batch) / (1.0 - spectrum.min_threshold());
  // The guard absorbs representation error, e.g. 500 / (1 - 0.8) = 2500.0000000000005.
  return static_cast<std::size_t>(std::ceil(n - 1e-9));
}

Eigen::VectorXd saddle_weights(const Spectrum& spectrum, const EpisodeBatch& batch,
                               const Eigen::MatrixXd& var_levels,
                               const Eigen::VectorXd& next_values) {
  const auto N = static_cast<Eigen::Index>(batch.transitions());
  if (var_levels.cols() != N || next_values.size() != N) {
    throw std::invalid_argument("saddle_weights: value inputs do not match the batch");
  }
  Eigen::VectorXd w = Eigen::VectorXd::Zero(N);
  for (std::size_t b = 0; b < batch.episodes; ++b) {
    for (int t = 0; t < batch.horizon; ++t) {
      const auto n = static_cast<Eigen::Index>(batch.step_col(b, t));
      const double z = batch.costs(n) + (t + 1 < batch.horizon ? next_values(n) : 0.0);
      for (std::size_t m = 0; m < spectrum.size(); ++m) {
        const double excess = z - var_levels(static_cast<Eigen::Index>(m), n);
        if (excess > 0.0) w(n) += spectrum.weight(m) / (1.0 - spectrum.threshold(m)) * excess;
      }
    }
  }
  return w;
}

double weighted_log_prob_loss(const Policy& policy, const EpisodeBatch& batch,
                              const Eigen::VectorXd& weights, std::vector<double>* grad) {
  std::vector<double> scratch;
  std::vector<double>& g = grad ? *grad : scratch;
  g.assign(policy.num_parameters(), 0.0);
  const Eigen::VectorXd lp =
      policy.log_prob_grad(batch.decision_states(), batch.raw_actions, weights, g);
  return weights.dot(lp);
}

double actor_loss(const Policy& policy, const ValueModel& value, const EpisodeBatch& batch,
                  std::vector<double>* grad) {
  const ValueOutput here = value.evaluate(batch.decision_states());
  Eigen::VectorXd next = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(batch.transitions()));
  if (batch.horizon > 1) next = value.evaluate(batch.next_states()).value;
  const Eigen::VectorXd w = saddle_weights(value.spectrum(), batch, here.var_levels, next);
  return weighted_log_prob_loss(policy, batch, w, grad);
}

ActorTrainer::ActorTrainer(Policy& policy, ActorConfig config, std::uint64_t seed)
    : policy_(policy), config_(config), seed_(seed), opt_(policy.num_parameters(), config.lr) {
  if (!config_.drop_value_gradient) {
    throw std::invalid_argument(
        "actor.drop_value_gradient = false is not supported: the continuation-value gradient "
        "term is always omitted");
  }
  if (config_.base_batch < 1) throw std::invalid_argument("actor batch must be >= 1");
}

std::vector<LossTraceRow> ActorTrainer::train(const Environment& env, const ValueModel& value,
                                              std::int64_t iteration, TransitionCounter* counter) {
  std::vector<LossTraceRow> trace;
  const std::size_t episodes = config_.effective_batch(value.spectrum());
  std::vector<double> grad;
  for (int k2 = 1; k2 <= config_.epochs; ++k2) {
    const EpisodeBatch batch =
        simulate_batch(env, policy_, episodes, derive_seed(seed_, epochs_), config_.threads);
    if (counter) counter->outer += batch.transitions();
    const double lr = opt_.learning_rate();
    const double loss = actor_loss(policy_, value, batch, &grad);
    if (!std::isfinite(loss)) {
      throw NumericalError("actor loss is not finite at iteration " + std::to_string(iteration) +
                           ", epoch " + std::to_string(k2));
    }
    for (std::size_t i = 0; i < grad.size(); ++i) {
      if (!std::isfinite(grad[i])) {
        throw NumericalError("non-finite policy gradient at parameter " + std::to_string(i));
      }
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
