#include <doctest.h>

#include <cmath>
#include <fstream>
#include <numbers>
#include <vector>

#include "dynrisk/adam.hpp"
#include "dynrisk/checkpoint.hpp"
#include "dynrisk/mlp.hpp"
#include "dynrisk/policy.hpp"
#include "helpers.hpp"

using namespace dynrisk;

namespace {

double sum_output(const Mlp& net, const Eigen::MatrixXd& x, const Eigen::MatrixXd& w) {
  return (net.forward(x).array() * w.array()).sum();
}

}  // namespace

TEST_CASE("MLP parameter count and layout") {
  const Mlp net(mlp_layout(3, 16, 5, 2), OutputActivation::identity());
  // 3*16+16 + 4*(16*16+16) + 16*2+2
  CHECK(net.num_parameters() == 64u + 4u * 272u + 34u);
  CHECK(net.num_layers() == 6);
  CHECK(net.input_dim() == 3);
  CHECK(net.output_dim() == 2);
  CHECK_THROWS(Mlp({3}, OutputActivation::identity()));
}

TEST_CASE("MLP with zero parameters outputs the activation at zero") {
  Mlp id(mlp_layout(2, 4, 2, 1), OutputActivation::identity());
  Mlp sp(mlp_layout(2, 4, 2, 1), OutputActivation::softplus());
  Mlp sg(mlp_layout(2, 4, 2, 1), OutputActivation::scaled_sigmoid(-2.0, 2.0));
  const std::vector<double> x{0.3, -1.2};
  CHECK(id.forward(x)(0) == 0.0);
  CHECK(sp.forward(x)(0) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(std::abs((sg.forward(x)(0)) - (0.0)) <= 1e-15);
}

TEST_CASE("single linear layer computes W x + b") {
  Mlp net({2, 1}, OutputActivation::identity());
  net.set_parameters(std::vector<double>{2.0, -3.0, 0.5});
  CHECK(net.forward(std::vector<double>{1.0, 1.0})(0) == doctest::Approx(-0.5));
  CHECK(net.forward(std::vector<double>{4.0, 2.0})(0) == doctest::Approx(2.5));
  CHECK_THROWS(net.set_parameters(std::vector<double>{1.0}));
}

TEST_CASE("softplus output is positive for any input") {
  Rng rng(2);
  Mlp net(mlp_layout(3, 8, 3, 1), OutputActivation::softplus());
  net.init_glorot(rng);
  for (double& p : net.parameters()) p *= 3.0;
  Eigen::MatrixXd x = Eigen::MatrixXd::Random(3, 500) * 10.0;
  CHECK((net.forward(x).array() > 0.0).all());
  // Far in the tail softplus underflows to zero but never goes negative.
  for (double& p : net.parameters()) p *= 20.0;
  CHECK((net.forward(x).array() >= 0.0).all());
}

TEST_CASE("MLP backward matches central differences") {
  Rng rng(7);
  for (const auto act : {OutputActivation::identity(), OutputActivation::softplus(),
                         OutputActivation::scaled_sigmoid(-1.0, 3.0)}) {
    Mlp net(mlp_layout(3, 6, 3, 2), act);
    net.init_glorot(rng);
    Eigen::MatrixXd x(3, 5), w(2, 5);
    for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = rng.normal();
    for (Eigen::Index i = 0; i < w.size(); ++i) w(i) = rng.normal();
    MlpTape tape;
    net.forward(x, &tape);
    std::vector<double> grad(net.num_parameters(), 0.0);
    net.backward(tape, w, grad);
    const double h = 1e-6;
    for (std::size_t k = 0; k < net.num_parameters(); ++k) {
      Mlp up = net, down = net;
      up.parameters()[k] += h;
      down.parameters()[k] -= h;
      const double fd = (sum_output(up, x, w) - sum_output(down, x, w)) / (2 * h);
      CHECK(grad[k] == doctest::Approx(fd).epsilon(1e-5).scale(1e-7));
    }
    const Eigen::MatrixXd dx = net.input_gradient(tape, w);
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      Eigen::MatrixXd up = x, down = x;
      up(i) += h;
      down(i) -= h;
      const double fd = (sum_output(net, up, w) - sum_output(net, down, w)) / (2 * h);
      CHECK(dx(i) == doctest::Approx(fd).epsilon(1e-5).scale(1e-7));
    }
  }
}

TEST_CASE("input affine map is applied before the first layer") {
  Rng rng(9);
  Mlp net(mlp_layout(2, 5, 2, 1), OutputActivation::identity());
  net.init_glorot(rng);
  Mlp scaled = net;
  scaled.set_input_affine({{1.0, -2.0}, {0.5, 4.0}});
  CHECK_FALSE(scaled.same_architecture(net));
  CHECK(std::abs(scaled.forward(std::vector<double>{3.0, -1.5})(0) -
                 net.forward(std::vector<double>{1.0, 2.0})(0)) <= 1e-14);
  CHECK_THROWS_AS(scaled.set_input_affine({{1.0}, {1.0}}), std::invalid_argument);

  Eigen::MatrixXd x(2, 4), w(1, 4);
  for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = rng.normal();
  for (Eigen::Index i = 0; i < w.size(); ++i) w(i) = rng.normal();
  MlpTape tape;
  scaled.forward(x, &tape);
  const Eigen::MatrixXd dx = scaled.input_gradient(tape, w);
  const double h = 1e-6;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Eigen::MatrixXd up = x, down = x;
    up(i) += h;
    down(i) -= h;
    const double fd = (sum_output(scaled, up, w) - sum_output(scaled, down, w)) / (2 * h);
    CHECK(std::abs(dx(i) - fd) <= 1e-6 * (1.0 + std::abs(fd)));
  }

  Checkpoint ck;
  store_mlp(ck, "net", scaled);
  store_mlp(ck, "plain", net);
  CHECK(ck.has("net.input_scale"));
  CHECK_FALSE(ck.has("plain.input_scale"));
  const auto path = testing::scratch("ckpt_affine") / "c.txt";
  ck.save(path);
  const Checkpoint back = Checkpoint::load(path);
  CHECK(load_mlp(back, "net").same_architecture(scaled));
  CHECK(load_mlp(back, "plain").same_architecture(net));
}

TEST_CASE("non-finite gradients are reported by name") {
  const Mlp net({1, 1}, OutputActivation::identity());
  std::vector<double> g{0.0, NAN};
  CHECK_THROWS_AS(net.check_finite(g, "H_1"), NumericalError);
  try {
    net.check_finite(g, "H_1");
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("H_1") != std::string::npos);
  }
}

TEST_CASE("Adam first step has size eta and the sign of the gradient") {
  Adam opt(3, LrSchedule{0.01, 1.0, 1, 0.0});
  std::vector<double> p{1.0, 1.0, 1.0};
  opt.step(p, std::vector<double>{5.0, -0.001, 0.0});
  CHECK(p[0] == doctest::Approx(0.99).epsilon(1e-6));
  CHECK(p[1] == doctest::Approx(1.01).epsilon(1e-4));
  CHECK(p[2] == 1.0);
  CHECK(opt.steps() == 1);
}

TEST_CASE("Adam minimizes a quadratic") {
  Adam opt(2, LrSchedule{0.05, 1.0, 1, 0.0});
  std::vector<double> p{3.0, -2.0};
  for (int i = 0; i < 2000; ++i) {
    opt.step(p, std::vector<double>{2 * (p[0] - 1.0), 2 * (p[1] + 0.5)});
  }
  CHECK(std::abs((p[0]) - (1.0)) <= 1e-3);
  CHECK(std::abs((p[1]) - (-0.5)) <= 1e-3);
}

TEST_CASE("learning-rate schedule") {
  const LrSchedule s{4e-3, 0.95, 50, 5e-4};
  CHECK(s.at(0) == 4e-3);
  CHECK(s.at(49) == 4e-3);
  CHECK(s.at(50) == doctest::Approx(3.8e-3));
  CHECK(s.at(100000) == 5e-4);
  // 0.95^k <= 1/8 first at k = 41.
  CHECK(s.floor_epoch() == 2050);
  CHECK(s.at(2049) > 5e-4);
  CHECK(s.at(2050) == 5e-4);
  Adam opt(1, s);
  for (int e = 0; e < 50; ++e) opt.end_epoch();
  CHECK(opt.learning_rate() == doctest::Approx(3.8e-3));
}

TEST_CASE("target sync copies parameters and rejects other shapes") {
  Rng rng(1);
  Mlp a(mlp_layout(2, 4, 2, 1), OutputActivation::softplus());
  Mlp b(mlp_layout(2, 4, 2, 1), OutputActivation::softplus());
  a.init_glorot(rng);
  sync_target(a, b);
  CHECK(std::equal(a.parameters().begin(), a.parameters().end(), b.parameters().begin()));
  a.parameters()[0] += 1.0;
  CHECK(a.parameters()[0] != b.parameters()[0]);
  Mlp c(mlp_layout(2, 5, 2, 1), OutputActivation::softplus());
  CHECK_THROWS(sync_target(a, c));
}

TEST_CASE("Gaussian policy sampling and log-density") {
  Rng rng(3);
  Mlp mean(mlp_layout(2, 4, 2, 1), OutputActivation::identity());
  mean.init_glorot(rng);
  GaussianPolicy policy(mean, std::log(0.5));
  const std::vector<double> s{0.2, -0.4};
  std::vector<double> m(1), raw(1), draws;
  policy.mean_action(s, m);
  for (int i = 0; i < 50000; ++i) {
    policy.sample(s, rng, raw);
    draws.push_back(raw[0]);
  }
  CHECK(std::abs((testing::mean(draws)) - (m[0])) <= 0.01);
  CHECK(std::sqrt(testing::variance(draws)) == doctest::Approx(0.5).epsilon(0.02));
  const double x = m[0] + 0.3;
  const double want = -0.5 * std::pow(0.3 / 0.5, 2) - std::log(0.5) - 0.5 * std::log(2 * std::numbers::pi);
  CHECK(policy.log_prob(s, std::vector<double>{x}) == doctest::Approx(want).epsilon(1e-12));

  // log_std is clipped on every write.
  auto params = policy.parameters();
  params.back() = 7.0;
  policy.set_parameters(params);
  CHECK(policy.log_std()[0] == GaussianPolicy::kLogStdMax);
  params.back() = -9.0;
  policy.set_parameters(params);
  CHECK(policy.log_std()[0] == GaussianPolicy::kLogStdMin);
}

TEST_CASE("policy log-density gradients match central differences") {
  Rng rng(5);
  Mlp mean(mlp_layout(3, 5, 2, 2), OutputActivation::identity());
  mean.init_glorot(rng);
  const GaussianPolicy gauss(mean, -0.3);
  TabularSoftmaxPolicy tab(2, 1, 4, 3);
  std::vector<double> logits(12);
  for (double& l : logits) l = rng.normal();
  tab.set_parameters(logits);

  auto check = [&](const Policy& policy, const Eigen::MatrixXd& states, const Eigen::MatrixXd& raws) {
    Eigen::VectorXd coef(states.cols());
    for (Eigen::Index i = 0; i < coef.size(); ++i) coef(i) = rng.normal();
    std::vector<double> grad(policy.num_parameters(), 0.0);
    policy.log_prob_grad(states, raws, coef, grad);
    auto objective = [&](const Policy& p) {
      double acc = 0.0;
      for (Eigen::Index n = 0; n < states.cols(); ++n) {
        const Eigen::VectorXd s = states.col(n), r = raws.col(n);
        acc += coef(n) * p.log_prob(std::span<const double>(s.data(), s.size()),
                                    std::span<const double>(r.data(), r.size()));
      }
      return acc;
    };
    const auto base = policy.parameters();
    const double h = 1e-6;
    for (std::size_t k = 0; k < base.size(); ++k) {
      auto up_p = base, down_p = base;
      up_p[k] += h;
      down_p[k] -= h;
      auto up = policy.clone(), down = policy.clone();
      up->set_parameters(up_p);
      down->set_parameters(down_p);
      const double fd = (objective(*up) - objective(*down)) / (2 * h);
      CHECK(grad[k] == doctest::Approx(fd).epsilon(1e-5).scale(1e-7));
    }
  };

  Eigen::MatrixXd gs(3, 6), gr(2, 6);
  for (Eigen::Index i = 0; i < gs.size(); ++i) gs(i) = rng.normal();
  for (Eigen::Index i = 0; i < gr.size(); ++i) gr(i) = rng.normal();
  check(gauss, gs, gr);

  Eigen::MatrixXd ts(2, 5), tr(1, 5);
  ts << 0, 0, 0.5, 0.5, 1, 0, 1, 2, 3, 1;
  tr << 0, 2, 1, 1, 2;
  check(tab, ts, tr);
}

TEST_CASE("tabular softmax probabilities") {
  TabularSoftmaxPolicy tab(2, 1, 3, 2);
  CHECK(tab.probabilities(1)[0] == doctest::Approx(0.5));
  tab.set_parameters(std::vector<double>{0, 0, std::log(3.0), 0, 0, 0});
  CHECK(tab.probabilities(1)[0] == doctest::Approx(0.75));
  std::vector<double> raw(1);
  tab.mean_action(std::vector<double>{0.5, 1.0}, raw);
  CHECK(raw[0] == 0.0);
}

TEST_CASE("checkpoint round-trip is bit-exact") {
  Rng rng(11);
  Mlp net(mlp_layout(3, 7, 3, 2), OutputActivation::scaled_sigmoid(-0.5, 1.5));
  net.init_glorot(rng);
  net.parameters()[0] = 0.1;  // not representable in binary
  GaussianPolicy policy(net, -1.234567890123);
  Adam opt(net.num_parameters(), LrSchedule{});
  std::vector<double> g(net.num_parameters());
  for (double& v : g) v = rng.normal();
  opt.step(net.parameters(), g);
  opt.end_epoch();

  Checkpoint ck;
  store_mlp(ck, "net", net);
  store_policy(ck, "policy", policy);
  store_adam(ck, "opt", opt);
  ck.set("note", "two words");
  ck.set_int("big", -1234567890123LL);
  ck.config_text = "[run]\nseed = 3\n";
  const auto path = testing::scratch("ckpt") / "c.txt";
  ck.save(path);
  const Checkpoint back = Checkpoint::load(path);
  CHECK(back == ck);
  const Mlp net2 = load_mlp(back, "net");
  CHECK(net2.same_architecture(net));
  CHECK(std::equal(net.parameters().begin(), net.parameters().end(), net2.parameters().begin()));
  const auto p2 = load_policy(back, "policy");
  CHECK(p2->parameters() == policy.parameters());
  Adam opt2(net.num_parameters(), LrSchedule{});
  load_adam(back, "opt", opt2);
  CHECK(opt2.first_moment() == opt.first_moment());
  CHECK(opt2.second_moment() == opt.second_moment());
  CHECK(opt2.steps() == 1);
  CHECK(opt2.epoch() == 1);
  CHECK(back.get("note") == "two words");
  CHECK(back.get_int("big") == -1234567890123LL);
  CHECK_THROWS_AS(back.get("missing"), CheckpointError);
}

TEST_CASE("corrupt checkpoints are rejected") {
  const auto dir = testing::scratch("ckpt_bad");
  {
    std::ofstream(dir / "a.txt") << "not a checkpoint\n";
  }
  CHECK_THROWS_AS(Checkpoint::load(dir / "a.txt"), CheckpointError);
  {
    std::ofstream(dir / "b.txt") << "dynrisk-checkpoint 1\na x 3 0x1p+0\n";
  }
  CHECK_THROWS_AS(Checkpoint::load(dir / "b.txt"), CheckpointError);
  CHECK_THROWS_AS(Checkpoint::load(dir / "missing.txt"), CheckpointError);
}
