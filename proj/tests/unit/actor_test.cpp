#include <doctest.h>

#include <cmath>
#include <vector>

#include "dynrisk/actor.hpp"
#include "dynrisk/critic.hpp"
#include "dynrisk/policy.hpp"
#include "dynrisk/simple_envs.hpp"
#include "dynrisk/statarb.hpp"
#include "dynrisk/tree.hpp"

using namespace dynrisk;

namespace {

/// Returns fixed VaR levels and values everywhere.
class FlatValue final : public ValueModel {
 public:
  FlatValue(Spectrum s, std::vector<double> var, double value)
      : s_(std::move(s)), var_(std::move(var)), value_(value) {}
  const Spectrum& spectrum() const override { return s_; }
  ValueOutput evaluate(const Eigen::MatrixXd& states) const override {
    ValueOutput out{Eigen::MatrixXd(static_cast<Eigen::Index>(var_.size()), states.cols()),
                    Eigen::VectorXd::Constant(states.cols(), value_)};
    for (std::size_t m = 0; m < var_.size(); ++m) out.var_levels.row(static_cast<Eigen::Index>(m)).setConstant(var_[m]);
    return out;
  }

 private:
  Spectrum s_;
  std::vector<double> var_;
  double value_;
};

GaussianPolicy small_policy(std::uint64_t seed) {
  Rng rng(seed);
  Mlp mean(mlp_layout(3, 6, 2, 1), OutputActivation::identity());
  mean.init_glorot(rng);
  return GaussianPolicy(mean, -0.5);
}

}  // namespace

TEST_CASE("effective actor batch") {
  ActorConfig cfg;
  cfg.base_batch = 500;
  CHECK(cfg.effective_batch(Spectrum::cvar(0.8)) == 2500);
  CHECK(cfg.effective_batch(Spectrum::cvar(0.5)) == 1000);
  CHECK(cfg.effective_batch(Spectrum({0.5, 0.9}, {0.4, 0.6})) == 1000);
  cfg.base_batch = 7;
  CHECK(cfg.effective_batch(Spectrum::cvar(0.5)) == 14);
}

TEST_CASE("VaR levels above every outcome give zero weights and a zero gradient") {
  StatArbSpec spec;
  spec.T = 3;
  const StatArbEnv env(spec);
  const GaussianPolicy policy = small_policy(1);
  const EpisodeBatch batch = simulate_batch(env, policy, 50, 3);
  const FlatValue value(Spectrum::cvar(0.5), {1e6}, 0.0);
  std::vector<double> grad;
  CHECK(actor_loss(policy, value, batch, &grad) == 0.0);
  for (double g : grad) CHECK(g == 0.0);
}

TEST_CASE("one-period actor loss reduces to the weighted log-likelihood of costs") {
  StatArbSpec spec;
  spec.T = 1;
  const StatArbEnv env(spec);
  const GaussianPolicy policy = small_policy(2);
  const EpisodeBatch batch = simulate_batch(env, policy, 40, 5);
  const Spectrum s({0.5, 0.9}, {0.4, 0.6});
  const std::vector<double> var{-0.1, 0.1};
  const FlatValue value(s, var, 123.0);  // the value must not enter with T = 1
  double want = 0.0;
  for (std::size_t b = 0; b < batch.episodes; ++b) {
    const auto n = static_cast<Eigen::Index>(batch.step_col(b, 0));
    const double c = batch.costs(n);
    const double w = 0.4 / 0.5 * std::max(0.0, c - var[0]) + 0.6 / 0.1 * std::max(0.0, c - var[1]);
    const Eigen::VectorXd st = batch.states.col(static_cast<Eigen::Index>(batch.state_col(b, 0)));
    const Eigen::VectorXd r = batch.raw_actions.col(n);
    want += w * policy.log_prob(std::span<const double>(st.data(), 3), std::span<const double>(r.data(), 1));
  }
  CHECK(actor_loss(policy, value, batch) == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("saddle weights use the next value before the last period") {
  const ConstantCostEnv env(2, 1.0);
  const ConstantPolicy policy(2, {0.0});
  const EpisodeBatch batch = simulate_batch(env, policy, 2, 1);
  Eigen::MatrixXd var = Eigen::MatrixXd::Constant(1, 4, 0.5);
  Eigen::VectorXd next = Eigen::VectorXd::Constant(4, 3.0);
  const Eigen::VectorXd w = saddle_weights(Spectrum::cvar(0.75), batch, var, next);
  CHECK(w(static_cast<Eigen::Index>(batch.step_col(0, 0))) == doctest::Approx((1.0 + 3.0 - 0.5) / 0.25));
  CHECK(w(static_cast<Eigen::Index>(batch.step_col(0, 1))) == doctest::Approx((1.0 - 0.5) / 0.25));
}

TEST_CASE("root-logit actor gradient matches the derivative of the exact tree risk") {
  // Away from the flat region: alpha = 0.3 keeps the root VaR at the -2 atom.
  const FiniteTreeMdp mdp = example_tree();
  const TreeEnv env(mdp);
  const Spectrum s = Spectrum::cvar(0.3);
  TabularSoftmaxPolicy policy(2, 1, mdp.size(), 2);
  std::vector<double> logits(2 * mdp.size(), 0.0);
  logits[0] = 0.3;
  logits[4] = -0.4;  // s1_up'
  policy.set_parameters(logits);

  const TabularValueModel value(s, tree_policy_risk(mdp, policy.table(), s));
  const std::size_t B = 400000;
  const EpisodeBatch batch = simulate_batch(env, policy, B, 21);
  std::vector<double> grad;
  actor_loss(policy, value, batch, &grad);

  const double h = 1e-6;
  for (std::size_t k : {0u, 1u}) {
    auto up = logits, down = logits;
    up[k] += h;
    down[k] -= h;
    TabularSoftmaxPolicy pu = policy, pd = policy;
    pu.set_parameters(up);
    pd.set_parameters(down);
    const double fd = (tree_policy_risk(mdp, pu.table(), s)[0].value -
                       tree_policy_risk(mdp, pd.table(), s)[0].value) / (2 * h);
    CHECK(std::abs((grad[k] / static_cast<double>(B)) - (fd)) <= 0.03);
  }
}

TEST_CASE("actor training rejects the unsupported value-gradient flag") {
  GaussianPolicy policy = small_policy(3);
  ActorConfig cfg;
  cfg.drop_value_gradient = false;
  CHECK_THROWS_AS(ActorTrainer(policy, cfg, 1), std::invalid_argument);
}

TEST_CASE("actor trainer moves the root toward the lower-risk action") {
  const FiniteTreeMdp mdp = example_tree();
  const TreeEnv env(mdp);
  const Spectrum s = Spectrum::cvar(0.3);
  TabularSoftmaxPolicy policy(2, 1, mdp.size(), 2);
  ActorConfig cfg;
  cfg.epochs = 40;
  cfg.base_batch = 200;
  cfg.lr = LrSchedule{0.05, 1.0, 1, 0.0};
  ActorTrainer trainer(policy, cfg, 7);
  TransitionCounter counter;
  for (int it = 0; it < 5; ++it) {
    const TabularValueModel value(s, tree_policy_risk(mdp, policy.table(), s));
    trainer.train(env, value, it, &counter);
  }
  CHECK(policy.probabilities(0)[0] > 0.8);
  CHECK(counter.outer == 5u * 40u * cfg.effective_batch(s) * 2u);
}
