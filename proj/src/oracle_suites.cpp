#include "dynrisk/oracle_suites.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <stdexcept>

#include "dynrisk/actor.hpp"
#include "dynrisk/critic.hpp"
#include "dynrisk/empirical.hpp"
#include "dynrisk/scoring.hpp"
#include "dynrisk/simple_envs.hpp"
#include "dynrisk/statarb.hpp"
#include "dynrisk/tree.hpp"

namespace dynrisk {

namespace {

OracleCheck check(const std::string& suite, std::string name, double value, double expected,
                  double tol, std::string detail = {}) {
  OracleCheck c{suite, std::move(name), std::abs(value - expected) <= tol, value, expected, tol,
                std::move(detail)};
  return c;
}

OracleCheck flag(const std::string& suite, std::string name, bool ok, std::string detail = {}) {
  return {suite, std::move(name), ok, ok ? 1.0 : 0.0, 1.0, 0.0, std::move(detail)};
}

std::string plan_text(const std::vector<int>& plan) {
  std::string s;
  for (std::size_t i = 0; i < plan.size(); ++i) {
    if (plan[i] < 0) continue;
    s += (s.empty() ? "" : " ") + std::to_string(i) + ":" + (plan[i] == 0 ? "up" : "down");
  }
  return s;
}

void tree_suite(std::vector<OracleCheck>& out) {
  const FiniteTreeMdp mdp = example_tree();
  constexpr int kUp = 0, kDown = 1;
  constexpr std::size_t kRoot = 0, kUpPrime = 2;

  std::vector<int> up_down(mdp.size(), -1);
  up_down[0] = kUp;
  up_down[1] = kUp;
  up_down[2] = kDown;
  std::vector<double> values, probs;
  plan_cost_distribution(mdp, up_down, kRoot, values, probs);
  out.push_back(check("tree", "static_cvar_0.9_up_down", weighted_cvar(values, probs, 0.9), -0.7, 1e-12));

  for (double alpha : {0.7, 0.75, 0.8, 0.85, 0.9, 0.99}) {
    const TreeSolution sol = tree_dynamic_risk(mdp, Spectrum::cvar(alpha));
    char name[64];
    std::snprintf(name, sizeof name, "dynamic_plan_up_up_alpha_%.2f", alpha);
    out.push_back(flag("tree", name, sol.action[kRoot] == kUp && sol.action[kUpPrime] == kUp,
                       plan_text(sol.action)));
  }

  const PlanResult pre = static_precommitment(mdp, Spectrum::cvar(0.9), kRoot);
  out.push_back(flag("tree", "static_plan_up_down_alpha_0.90",
                     pre.plan[kRoot] == kUp && pre.plan[kUpPrime] == kDown, plan_text(pre.plan)));
  out.push_back(check("tree", "static_plan_value_alpha_0.90", pre.value, -0.7, 1e-12));
}

void cvar_suite(std::vector<OracleCheck>& out, std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0x63766172ULL));
  int translation = 0, homogeneity = 0, monotone = 0, subadditive = 0, above_var = 0, above_mean = 0,
      routes = 0, spectral_mix = 0;
  constexpr int kTrials = 100;
  double worst_route = 0.0;
  for (int trial = 0; trial < kTrials; ++trial) {
    const std::size_t n = 5 + static_cast<std::size_t>(rng.uniform() * 200);
    const double alpha = 0.05 + 0.9 * rng.uniform();
    std::vector<double> x(n), y(n), shifted(n), scaled(n), bigger(n), sum(n);
    const double c = 4.0 * rng.normal(), lam = 0.1 + 3.0 * rng.uniform();
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = rng.normal();
      y[i] = rng.normal() * 2.0 + 0.5;
      shifted[i] = x[i] + c;
      scaled[i] = lam * x[i];
      bigger[i] = x[i] + std::abs(rng.normal());
      sum[i] = x[i] + y[i];
    }
    const double cx = empirical_cvar(x, alpha);
    const double tol = 1e-9 * (1.0 + std::abs(cx));
    translation += std::abs(empirical_cvar(shifted, alpha) - (cx + c)) <= tol + 1e-9 * std::abs(c);
    homogeneity += std::abs(empirical_cvar(scaled, alpha) - lam * cx) <= tol * (1.0 + lam);
    monotone += empirical_cvar(bigger, alpha) >= cx - tol;
    subadditive += empirical_cvar(sum, alpha) <= cx + empirical_cvar(y, alpha) + tol;
    above_var += cx >= empirical_var(x, alpha) - tol;
    double mean = 0.0;
    for (double v : x) mean += v;
    above_mean += cx >= mean / static_cast<double>(n) - tol;
    const std::vector<double> w(n, 1.0 / static_cast<double>(n));
    const double gap = std::abs(weighted_cvar(x, w, alpha) - cx);
    worst_route = std::max(worst_route, gap);
    routes += gap <= 1e-10 * (1.0 + std::abs(cx));
    const Spectrum sp({0.5, 0.9}, {0.4, 0.6});
    spectral_mix += std::abs(empirical_spectral(x, sp) -
                             (0.4 * empirical_cvar(x, 0.5) + 0.6 * empirical_cvar(x, 0.9))) <= tol;
  }
  auto add = [&](const char* name, int count) {
    out.push_back(check("cvar", name, count, kTrials, 0.0, std::to_string(count) + "/100 samples"));
  };
  add("translation_invariance", translation);
  add("positive_homogeneity", homogeneity);
  add("monotonicity", monotone);
  add("subadditivity", subadditive);
  add("cvar_at_least_var", above_var);
  add("cvar_at_least_mean", above_mean);
  char detail[64];
  std::snprintf(detail, sizeof detail, "max gap %.3g", worst_route);
  out.push_back(check("cvar", "sorted_vs_weighted_route", routes, kTrials, 0.0, detail));
  add("spectral_is_weighted_cvar", spectral_mix);
}

/// Max over coordinates of |analytic - central difference| / max(|a|, |fd|, floor).
double fd_error(std::span<double> params, const std::vector<double>& analytic,
                const std::function<double()>& loss, double h, double floor) {
  double worst = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double keep = params[i];
    params[i] = keep + h;
    const double up = loss();
    params[i] = keep - h;
    const double down = loss();
    params[i] = keep;
    const double fd = (up - down) / (2.0 * h);
    const double scale = std::max({std::abs(fd), std::abs(analytic[i]), floor});
    worst = std::max(worst, std::abs(analytic[i] - fd) / scale);
  }
  return worst;
}

double policy_fd_error(Policy& policy, const std::vector<double>& analytic,
                       const std::function<double()>& loss, double h, double floor) {
  std::vector<double> p = policy.parameters();
  double worst = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double keep = p[i];
    p[i] = keep + h;
    policy.set_parameters(p);
    const double up = loss();
    p[i] = keep - h;
    policy.set_parameters(p);
    const double down = loss();
    p[i] = keep;
    policy.set_parameters(p);
    const double fd = (up - down) / (2.0 * h);
    const double scale = std::max({std::abs(fd), std::abs(analytic[i]), floor});
    worst = std::max(worst, std::abs(analytic[i] - fd) / scale);
  }
  return worst;
}

/// Smallest distance between a target and any VaR level; small means a kink.
double kink_margin(const ValueEnsemble& ens, const EpisodeBatch& batch) {
  const Eigen::VectorXd y = running_targets(ens, batch);
  const ValueOutput v = ens.evaluate(batch.decision_states());
  double margin = INFINITY;
  for (Eigen::Index n = 0; n < y.size(); ++n)
    for (Eigen::Index m = 0; m < v.var_levels.rows(); ++m)
      margin = std::min(margin, std::abs(y(n) - v.var_levels(m, n)));
  return margin;
}

void grad_suite(std::vector<OracleCheck>& out, std::uint64_t seed) {
  constexpr int kSeeds = 100;
  constexpr double kH = 1e-5, kTol = 1e-3, kFloor = 1e-6;

  double mlp_worst = 0.0;
  for (int s = 0; s < kSeeds; ++s) {
    Rng rng(derive_seed(seed, 0x6d6c70ULL + static_cast<std::uint64_t>(s)));
    Mlp net({3, 5, 4, 2}, OutputActivation::identity());
    net.init_glorot(rng);
    for (auto& p : net.parameters()) p += 0.1 * rng.normal();
    Eigen::MatrixXd x(3, 6), target(2, 6);
    for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = rng.normal();
    for (Eigen::Index i = 0; i < target.size(); ++i) target(i) = rng.normal();
    auto loss = [&] { return 0.5 * (net.forward(x) - target).squaredNorm(); };
    MlpTape tape;
    const Eigen::MatrixXd y = net.forward(x, &tape);
    std::vector<double> g(net.num_parameters(), 0.0);
    net.backward(tape, y - target, g);
    mlp_worst = std::max(mlp_worst, fd_error(net.parameters(), g, loss, kH, kFloor));
  }
  out.push_back(check("grad", "mlp_quadratic_loss", mlp_worst, 0.0, 1e-4, "max relative error, 100 seeds"));

  {
    const double a1 = 0.3, a2 = 0.9, y = 1.4, alpha = 0.8, C = 5.0;
    const double analytic = 1.0 / (a2 + C) - C / ((a2 + C) * (a2 + C)) -
                            ((y <= a1 ? 1.0 - alpha : -alpha) * a1 + (y > a1 ? y : 0.0)) /
                                ((a2 + C) * (a2 + C) * (1.0 - alpha));
    const double h = 1e-6;
    const double fd = (score_cvar(a1, a2 + h, y, alpha, C) - score_cvar(a1, a2 - h, y, alpha, C)) / (2 * h);
    out.push_back(check("grad", "score_cvar_d_a2", fd, analytic, 1e-8));
  }

  StatArbSpec spec;
  spec.T = 3;
  spec.q0_spread = 3.0;
  const StatArbEnv env(spec);
  const double C = spec.default_cost_bound();
  const std::vector<std::pair<std::string, Spectrum>> spectra{
      {"cvar", Spectrum::cvar(0.7)}, {"spectral", Spectrum({0.5, 0.9}, {0.4, 0.6})}};
  for (const auto& [label, spectrum] : spectra) {
    double critic_worst = 0.0, actor_worst = 0.0;
    for (int s = 0; s < kSeeds; ++s) {
      const std::uint64_t base = derive_seed(seed, 0x677261640000ULL + static_cast<std::uint64_t>(s));
      Rng rng(base);
      Mlp mean({3, 4, 4, 1}, OutputActivation::identity());
      mean.init_glorot(rng);
      GaussianPolicy policy(std::move(mean), std::log(0.5));
      ValueEnsemble ens(spectrum, 3, 4, 2, rng);
      for (std::size_t l = 0; l < ens.size(); ++l) {
        for (auto& p : ens.net(l).parameters()) p += 0.3 * rng.normal();
        for (auto& p : ens.target(l).parameters()) p += 0.3 * rng.normal();
      }
      EpisodeBatch batch;
      for (std::uint64_t attempt = 0;; ++attempt) {
        batch = simulate_batch(env, policy, 4, derive_seed(base, attempt));
        if (kink_margin(ens, batch) > 1e-3) break;
        if (attempt > 50) throw std::runtime_error("grad suite could not avoid indicator kinks");
      }
      // Critic losses (L1 for one atom, L3 for the spectrum), one net at a time.
      std::vector<std::vector<double>> grads;
      critic_loss(ens, batch, C, &grads);
      for (std::size_t l = 0; l < ens.size(); ++l) {
        auto loss = [&] { return critic_loss(ens, batch, C); };
        critic_worst = std::max(critic_worst, fd_error(ens.net(l).parameters(), grads[l], loss, kH, kFloor));
      }
      // Actor losses (L2 / L4) with the ensemble as a frozen value model.
      std::vector<double> g;
      actor_loss(policy, ens, batch, &g);
      auto loss = [&] { return actor_loss(policy, ens, batch); };
      actor_worst = std::max(actor_worst, policy_fd_error(policy, g, loss, kH, kFloor));
    }
    out.push_back(check("grad", "critic_loss_" + label, critic_worst, 0.0, kTol, "max relative error, 100 seeds"));
    out.push_back(check("grad", "actor_loss_" + label, actor_worst, 0.0, kTol, "max relative error, 100 seeds"));
  }
}

}  // namespace

std::vector<std::string> oracle_suite_names() { return {"tree", "cvar", "grad", "all"}; }

std::vector<OracleCheck> run_oracle_suite(const std::string& suite, std::uint64_t seed) {
  std::vector<OracleCheck> out;
  const bool all = suite == "all";
  if (!all && suite != "tree" && suite != "cvar" && suite != "grad") {
    throw std::invalid_argument("unknown oracle suite '" + suite + "' (tree, cvar, grad, all)");
  }
  if (all || suite == "tree") tree_suite(out);
  if (all || suite == "cvar") cvar_suite(out, seed);
  if (all || suite == "grad") grad_suite(out, seed);
  return out;
}

}  // namespace dynrisk
