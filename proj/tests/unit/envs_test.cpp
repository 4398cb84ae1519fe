#include <doctest.h>

#include <cmath>
#include <memory>
#include <numeric>
#include <sstream>
#include <vector>

#include "dynrisk/environment.hpp"
#include "dynrisk/policy.hpp"
#include "dynrisk/portfolio.hpp"
#include "dynrisk/simple_envs.hpp"
#include "dynrisk/statarb.hpp"
#include "dynrisk/tree.hpp"
#include "helpers.hpp"

using namespace dynrisk;

TEST_CASE("OU step is exact") {
  StatArbSpec spec;
  spec.kappa = 2.0;
  spec.mu = 1.0;
  spec.sigma = 0.0;
  spec.dt = std::log(2.0) / 2.0;
  CHECK(ou_step(2.0, spec, 0.7) == doctest::Approx(1.5).epsilon(1e-14));

  // Moments of one step from S = 0.4 over many draws.
  spec.sigma = 0.3;
  spec.dt = 0.2;
  Rng rng(4);
  std::vector<double> x(200000);
  for (double& v : x) v = ou_step(0.4, spec, rng.normal());
  const double d = std::exp(-spec.kappa * spec.dt);
  const double var = spec.sigma * spec.sigma * (1 - d * d) / (2 * spec.kappa);
  CHECK(std::abs((testing::mean(x)) - (1.0 + (0.4 - 1.0) * d)) <= 5 * std::sqrt(var / x.size()));
  CHECK(testing::variance(x) == doctest::Approx(var).epsilon(0.02));
}

TEST_CASE("stat-arb: buy one then hold") {
  StatArbSpec spec;
  spec.T = 2;
  spec.sigma = 0.0;
  const StatArbEnv env(spec);
  std::vector<double> s{0.0, 1.0, 0.0}, next(3), applied(1);
  Rng rng(1);
  const double c0 = env.step(0, s, std::vector<double>{env.raw_for_trade(1.0)}, rng, next, applied);
  CHECK(applied[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(c0 == doctest::Approx(1.005).epsilon(1e-12));
  CHECK(next[0] == 0.5);
  CHECK(next[2] == doctest::Approx(1.0).epsilon(1e-12));
  std::vector<double> last(3);
  const double c1 = env.step(1, next, std::vector<double>{env.raw_for_trade(0.0)}, rng, last, applied);
  CHECK(std::abs((applied[0]) - (0.0)) <= 1e-12);
  CHECK(c1 == doctest::Approx(-0.5).epsilon(1e-9));
  CHECK(last[0] == 1.0);
}

TEST_CASE("stat-arb: trades respect inventory bounds and the action range") {
  const StatArbEnv env(StatArbSpec{});
  CHECK(std::abs((env.trade_from_raw(0.0)) - (0.0)) <= 1e-15);
  CHECK(env.trade_from_raw(800.0) == doctest::Approx(2.0));
  CHECK(env.trade_from_raw(-800.0) == doctest::Approx(-2.0));
  CHECK(env.trade_from_raw(env.raw_for_trade(1.3)) == doctest::Approx(1.3).epsilon(1e-12));
  CHECK_THROWS(env.raw_for_trade(2.0));
  std::vector<double> s{0.0, 1.0, 4.5}, next(3);
  double trade = 0.0;
  env.step_with(0, s, 50.0, 0.0, next, trade);
  CHECK(next[2] == 5.0);
  CHECK(trade == doctest::Approx(0.5).epsilon(1e-12));
  CHECK_THROWS_AS(StatArbEnv([] {
                    StatArbSpec bad;
                    bad.q_min = 1.0;
                    bad.q_max = 0.0;
                    return bad;
                  }()),
                  std::invalid_argument);
}

TEST_CASE("stat-arb initial states") {
  StatArbSpec spec;
  spec.q0_spread = 3.0;
  const StatArbEnv env(spec);
  Rng rng(2);
  std::vector<double> s(3), prices;
  for (int i = 0; i < 50000; ++i) {
    env.initial_state(rng, s);
    CHECK(s[0] == 0.0);
    CHECK(std::abs(s[2]) <= 3.0);
    prices.push_back(s[1]);
  }
  CHECK(std::abs((testing::mean(prices)) - (spec.mu)) <= 0.01);
  CHECK(std::sqrt(testing::variance(prices)) == doctest::Approx(spec.stationary_sd()).epsilon(0.02));
}

TEST_CASE("portfolio: costs sum to initial minus terminal wealth") {
  PortfolioSpec spec;
  auto prices = std::make_shared<DiffusionPriceModel>(spec);
  const PortfolioEnv env(prices, true);
  CHECK(env.state_dim() == 5);
  CHECK(env.raw_action_dim() == 4);
  Rng policy_rng(3);
  const FunctionPolicy policy(5, 4, [](std::span<const double> s, std::span<double> raw) {
    for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = std::sin(3.0 * s[0] + static_cast<double>(i));
  });
  const EpisodeBatch batch = simulate_batch(env, policy, 200, 17);
  for (std::size_t b = 0; b < batch.episodes; ++b) {
    double total = 0.0;
    for (int t = 0; t < batch.horizon; ++t) total += batch.cost(b, t);
    const double yT = batch.states(4, static_cast<Eigen::Index>(batch.state_col(b, batch.horizon)));
    CHECK(total == doctest::Approx(env.initial_wealth() - yT).epsilon(1e-12));
    for (int t = 0; t < batch.horizon; ++t) {
      const auto w = batch.actions.col(static_cast<Eigen::Index>(batch.step_col(b, t)));
      CHECK(w.sum() == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(w.minCoeff() > 0.0);
    }
  }
}

TEST_CASE("softmax weights") {
  std::vector<double> w(3);
  softmax_weights(std::vector<double>{0.0, 0.0, 0.0}, w);
  for (double v : w) CHECK(v == doctest::Approx(1.0 / 3.0));
  softmax_weights(std::vector<double>{1000.0, 0.0, -1000.0}, w);
  CHECK(w[0] == doctest::Approx(1.0));
  CHECK(std::isfinite(w[2]));
}

TEST_CASE("GBM one-period mean and log-variance") {
  PortfolioSpec spec;
  spec.dynamics = {AssetDynamics::gbm, AssetDynamics::gbm, AssetDynamics::gbm};
  const DiffusionPriceModel model(spec);
  Rng rng(6);
  std::vector<double> s0(3, 1.0), s1(3);
  std::vector<std::vector<double>> logs(3);
  for (int i = 0; i < 100000; ++i) {
    model.advance(0, s0, rng, s1);
    for (int a = 0; a < 3; ++a) logs[a].push_back(std::log(s1[a]));
  }
  for (int a = 0; a < 3; ++a) {
    const double mu = spec.mu[a], sg = spec.sigma[a];
    CHECK(std::abs((testing::mean(logs[a])) - ((mu - 0.5 * sg * sg) * spec.dt)) <= 3e-3);
    CHECK(testing::variance(logs[a]) == doctest::Approx(sg * sg * spec.dt).epsilon(0.02));
  }
  // Correlation of the log returns of assets 0 and 1.
  const double m0 = testing::mean(logs[0]), m1 = testing::mean(logs[1]);
  double cov = 0.0;
  for (std::size_t i = 0; i < logs[0].size(); ++i) cov += (logs[0][i] - m0) * (logs[1][i] - m1);
  cov /= static_cast<double>(logs[0].size() - 1);
  const double corr = cov / std::sqrt(testing::variance(logs[0]) * testing::variance(logs[1]));
  CHECK(std::abs((corr) - (0.2)) <= 0.01);
}

TEST_CASE("exp-OU with zero volatility follows its level") {
  PortfolioSpec spec;
  spec.sigma = {0.0, 0.0, 0.0};
  const DiffusionPriceModel model(spec);
  Rng rng(1);
  std::vector<double> s(3, 1.0), next(3);
  for (int t = 0; t < spec.T; ++t) {
    model.advance(t, s, rng, next);
    s = next;
  }
  for (int a = 0; a < 3; ++a) CHECK(s[a] == doctest::Approx(std::exp(spec.mu[a] * spec.T * spec.dt)).epsilon(1e-12));
}

TEST_CASE("portfolio spec validation") {
  PortfolioSpec spec;
  spec.rho(0, 1) = 0.5;
  CHECK_THROWS_AS(DiffusionPriceModel{spec}, ConfigError);
  PortfolioSpec bad;
  bad.rho = PortfolioSpec::uniform_correlation(3, -0.9);
  CHECK_THROWS_AS(DiffusionPriceModel{bad}, ConfigError);
}

TEST_CASE("VECM trivial cases") {
  VecmSpec spec;
  spec.Pi = Eigen::MatrixXd::Zero(2, 2);
  spec.Sigma_u = Eigen::MatrixXd::Zero(2, 2);
  spec.C_det = Eigen::Vector2d(0.01, -0.02);
  spec.T = 3;
  spec.steps_per_period = 10;
  const VecmPriceModel model(spec);
  Rng rng(1);
  std::vector<double> s(2), next(2);
  model.initial_prices(s);
  model.advance(0, s, rng, next);
  CHECK(next[0] == doctest::Approx(std::exp(0.1)).epsilon(1e-12));
  CHECK(next[1] == doctest::Approx(std::exp(-0.2)).epsilon(1e-12));

  // Pi = -I pulls log prices to C every day.
  spec.Pi = -Eigen::MatrixXd::Identity(2, 2);
  const VecmPriceModel pulled(spec);
  pulled.advance(0, std::vector<double>{3.0, 0.5}, rng, next);
  CHECK(std::log(next[0]) == doctest::Approx(0.01).epsilon(1e-12));
  CHECK(std::log(next[1]) == doctest::Approx(-0.02).epsilon(1e-12));
}

TEST_CASE("PSD repair floors negative eigenvalues") {
  Eigen::Matrix2d m;
  m << 1.0, 2.0, 2.0, 1.0;  // eigenvalues 3, -1
  Eigen::MatrixXd repaired;
  const Eigen::MatrixXd L = psd_factor(m, &repaired);
  Eigen::Matrix2d want;
  want << 1.5, 1.5, 1.5, 1.5;
  CHECK((repaired - want).norm() < 1e-12);
  CHECK(((L * L.transpose()) - repaired).norm() < 1e-12);
  Eigen::Matrix2d spd;
  spd << 2.0, 0.5, 0.5, 1.0;
  psd_factor(spd, &repaired);
  CHECK((repaired - spd).norm() < 1e-12);
}

TEST_CASE("bundled VECM estimates load") {
  const VecmSpec spec = VecmSpec::bundled();
  CHECK(spec.dim() == 8);
  const VecmPriceModel model(spec);
  CHECK(model.repaired_covariance().rows() == 8);
  CHECK(model.factor().allFinite());
}

TEST_CASE("constant-cost environment") {
  const ConstantCostEnv env(4, 1.5);
  const ConstantPolicy policy(2, {0.0});
  const EpisodeBatch batch = simulate_batch(env, policy, 10, 1);
  CHECK(batch.costs.size() == 40);
  CHECK((batch.costs.array() == 1.5).all());
  CHECK(batch.states(0, static_cast<Eigen::Index>(batch.state_col(3, 4))) == 1.0);
}

TEST_CASE("tree environment follows edge probabilities") {
  TreeEnv env(example_tree());
  CHECK(env.horizon() == 2);
  const ConstantPolicy up(2, {0.0});
  const EpisodeBatch batch = simulate_batch(env, up, 20000, 5);
  int to_prime = 0;
  for (std::size_t b = 0; b < batch.episodes; ++b) {
    const double node = batch.states(1, static_cast<Eigen::Index>(batch.state_col(b, 1)));
    to_prime += node == 2.0;
  }
  CHECK(std::abs((to_prime / 20000.0) - (0.1)) <= 0.01);
}

TEST_CASE("tree file parsing rejects malformed trees") {
  std::istringstream ok("depth 1\nnode 0 0\nnode 1 1\nedge 0 0 1 1 0.5\n");
  const FiniteTreeMdp mdp = FiniteTreeMdp::parse(ok);
  CHECK(mdp.size() == 2);
  std::istringstream bad_prob("depth 1\nnode 0 0\nnode 1 1\nedge 0 0 1 0.5 0\n");
  CHECK_THROWS_AS(FiniteTreeMdp::parse(bad_prob), TreeStructureError);
  std::istringstream shallow_leaf("depth 2\nnode 0 0\nnode 1 1\nedge 0 0 1 1 0\n");
  CHECK_THROWS_AS(FiniteTreeMdp::parse(shallow_leaf), TreeStructureError);
}

TEST_CASE("simulate_batch is deterministic and thread-count independent") {
  StatArbSpec spec;
  spec.q0_spread = 2.0;
  const StatArbEnv env(spec);
  Rng init(1);
  Mlp mean(mlp_layout(3, 8, 2, 1), OutputActivation::identity());
  mean.init_glorot(init);
  const GaussianPolicy policy(mean, -0.5);
  const EpisodeBatch a = simulate_batch(env, policy, 64, 99, 1);
  const EpisodeBatch b = simulate_batch(env, policy, 64, 99, 4);
  const EpisodeBatch c = simulate_batch(env, policy, 64, 100, 1);
  CHECK(a == b);
  CHECK_FALSE(a == c);
  CHECK(a.transitions() == 64u * 5u);
  CHECK(a.decision_states().cols() == 320);
  CHECK(a.next_states().col(0) == a.states.col(1));
}
