#include <doctest.h>

#include <cmath>
#include <vector>

#include "dynrisk/empirical.hpp"
#include "dynrisk/rng.hpp"
#include "dynrisk/scoring.hpp"
#include "dynrisk/spectrum.hpp"

using namespace dynrisk;

namespace {

struct GridMin {
  double a1, a2;
};

/// Exhaustive grid search of the mean CVaR score; ties keep the
/// lexicographically smallest (a1, a2).
GridMin minimize_cvar_score(const std::vector<double>& y, double alpha, double C, double lo,
                            double hi, double step) {
  const int n = static_cast<int>(std::lround((hi - lo) / step));
  GridMin best{lo, lo};
  double best_score = INFINITY;
  for (int i = 0; i <= n; ++i) {
    const double a1 = lo + i * step;
    for (int j = 0; j <= n; ++j) {
      const double a2 = lo + j * step;
      double s = 0.0;
      for (double v : y) s += score_cvar(a1, a2, v, alpha, C);
      if (s < best_score - 1e-12) {
        best_score = s;
        best = {a1, a2};
      }
    }
  }
  return best;
}

}  // namespace

TEST_CASE("spectrum validation reports each violated rule") {
  CHECK(validate_spectrum(std::vector<double>{0.5, 0.9}, std::vector<double>{0.4, 0.6}).ok());

  const auto unordered = validate_spectrum(std::vector<double>{0.9, 0.5}, std::vector<double>{0.4, 0.6});
  REQUIRE_FALSE(unordered.ok());
  CHECK(unordered.to_string().find("increasing") != std::string::npos);

  const auto bad_sum = validate_spectrum(std::vector<double>{0.5, 0.9}, std::vector<double>{0.4, 0.4});
  REQUIRE_FALSE(bad_sum.ok());
  CHECK(bad_sum.to_string().find("sum") != std::string::npos);

  const auto many = validate_spectrum(std::vector<double>{1.2, 0.5}, std::vector<double>{-0.1, 0.4});
  CHECK(many.violations.size() >= 3);

  CHECK_THROWS_AS(Spectrum({0.5, 0.9}, {0.5}), SpectrumError);
  CHECK_THROWS_AS(Spectrum::cvar(1.0), SpectrumError);
  CHECK_THROWS_AS(Spectrum::cvar(0.0), SpectrumError);
}

TEST_CASE("spectrum text form round-trips") {
  const Spectrum s = Spectrum::parse("0.5:0.4, 0.9:0.6");
  CHECK(s.size() == 2);
  CHECK(s.threshold(1) == 0.9);
  CHECK(s.weight(0) == 0.4);
  CHECK(Spectrum::parse(s.to_string()) == s);
  CHECK(Spectrum::parse("0.5") == Spectrum::cvar(0.5));  // a bare threshold is a CVaR
  CHECK_THROWS_AS(Spectrum::parse("0.5:x"), SpectrumError);
  // Range-VaR weights are negative for beta < 1 and must be rejected.
  const double a = 0.5, b = 0.9;
  CHECK_THROWS_AS(Spectrum({a, b}, {(1 - a) / (b - a), (b - 1) / (b - a)}), SpectrumError);
}

TEST_CASE("score_cvar at the all-zero point is zero") {
  CHECK(std::abs((score_cvar(0.0, 0.0, 0.0, 0.5, 1.0)) - (0.0)) <= 1e-15);
}

TEST_CASE("score_cvar matches the closed form") {
  const double a1 = 0.4, a2 = 1.1, y = 0.2, alpha = 0.7, C = 3.0;
  const double expected = std::log((a2 + C) / (y + C)) - a2 / (a2 + C) +
                          ((1.0 - alpha) * a1) / ((a2 + C) * (1.0 - alpha));
  CHECK(score_cvar(a1, a2, y, alpha, C) == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("score domain errors name the argument") {
  try {
    score_cvar(0.0, 0.0, -2.0, 0.5, 1.0);
    FAIL("expected a domain error");
  } catch (const ScoreDomainError& e) {
    CHECK(e.argument() == "y");
    CHECK(e.value() == -2.0);
  }
  try {
    score_cvar(0.0, -1.0, 0.0, 0.5, 1.0);
    FAIL("expected a domain error");
  } catch (const ScoreDomainError& e) {
    CHECK(e.argument() == "a2");
  }
  CHECK_THROWS_AS(ScoreParams(0.0, Spectrum::cvar(0.5)), std::invalid_argument);
}

TEST_CASE("one-atom spectral score equals score_cvar") {
  Rng rng(11);
  for (int i = 0; i < 1000; ++i) {
    const double alpha = 0.01 + 0.98 * rng.uniform();
    const double a1 = 2 * rng.normal(), a2 = a1 + std::abs(rng.normal()), y = 2 * rng.normal();
    const double C = 20.0;
    const Spectrum s = Spectrum::cvar(alpha);
    const double want = score_cvar(a1, a2, y, alpha, C);
    const double got = score_spectral_raw(std::vector<double>{a1}, a2, y, s, C);
    CHECK(std::abs(got - want) <= 1e-12);
    CHECK(score_spectral({{a1}, a2}, y, ScoreParams(C, s)) == got);
  }
}

TEST_CASE("spectral score at all-zero estimates is zero") {
  const Spectrum s({0.5, 0.9}, {0.4, 0.6});
  CHECK(std::abs(score_spectral_raw(std::vector<double>{0.0, 0.0}, 0.0, 0.0, s, 1.0)) < 1e-15);
}

TEST_CASE("grid minimizer of the CVaR score on {1..10}") {
  std::vector<double> y;
  for (int i = 1; i <= 10; ++i) y.push_back(i);
  const GridMin m = minimize_cvar_score(y, 0.8, 20.0, 0.0, 12.0, 0.05);
  CHECK(std::abs((m.a1) - (8.0)) <= 0.05 + 1e-9);
  CHECK(std::abs((m.a2) - (9.5)) <= 0.05 + 1e-9);
}

TEST_CASE("grid minimizer on the two-period tree distribution gives -0.7") {
  // -2 w.p. 0.9, -1 w.p. 0.09, 2 w.p. 0.01 as 100 equally weighted draws.
  std::vector<double> y(90, -2.0);
  y.insert(y.end(), 9, -1.0);
  y.push_back(2.0);
  const GridMin m = minimize_cvar_score(y, 0.9, 10.0, -3.0, 3.0, 0.05);
  CHECK(std::abs((m.a2) - (-0.7)) <= 0.05 + 1e-9);
}

TEST_CASE("score_cvar curvature in a2 follows its closed form") {
  // With x = a2 + C and K the bracketed term over (1 - alpha), the second
  // derivative is (2(C + K) - x) / x^3: strictly convex while x < 2(C + K).
  Rng rng(5);
  int convex_points = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const double a1 = rng.normal(), y = rng.normal(), alpha = 0.05 + 0.9 * rng.uniform(), C = 10.0;
    const double K = ((y <= a1 ? 1.0 - alpha : -alpha) * a1 + (y > a1 ? y : 0.0)) / (1.0 - alpha);
    for (double a2 = -9.5; a2 < 40.0; a2 += 0.5) {
      const double h = 1e-3, x = a2 + C;
      const double second = (score_cvar(a1, a2 + h, y, alpha, C) - 2 * score_cvar(a1, a2, y, alpha, C) +
                             score_cvar(a1, a2 - h, y, alpha, C)) / (h * h);
      const double exact = (2 * (C + K) - x) / (x * x * x);
      CHECK(second == doctest::Approx(exact).epsilon(1e-3).scale(1e-6));
      if (x < 2 * (C + K) - 0.01) {
        CHECK(second > 0.0);
        ++convex_points;
      }
    }
  }
  CHECK(convex_points > 5000);
}

TEST_CASE("shifting the data shifts the score minimizer") {
  std::vector<double> y;
  for (int i = 1; i <= 10; ++i) y.push_back(i);
  std::vector<double> shifted;
  for (double v : y) shifted.push_back(v + 2.0);
  const GridMin a = minimize_cvar_score(y, 0.8, 20.0, 0.0, 14.0, 0.1);
  const GridMin b = minimize_cvar_score(shifted, 0.8, 20.0, 0.0, 14.0, 0.1);
  CHECK(std::abs((b.a1 - a.a1) - (2.0)) <= 0.1 + 1e-9);
  CHECK(std::abs((b.a2 - a.a2) - (2.0)) <= 0.1 + 1e-9);
}

TEST_CASE("score gradient matches central differences away from kinks") {
  Rng rng(3);
  const Spectrum s({0.5, 0.9}, {0.4, 0.6});
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> var{rng.normal(), 0.0};
    var[1] = var[0] + std::abs(rng.normal());
    const double risk = var[1] + std::abs(rng.normal());
    const double y = 2 * rng.normal();
    if (std::abs(y - var[0]) < 1e-3 || std::abs(y - var[1]) < 1e-3) continue;
    const double C = 15.0;
    std::vector<double> d_var(2);
    double d_risk = 0.0;
    const double value = score_spectral_grad(var, risk, y, s, C, d_var, d_risk);
    CHECK(value == doctest::Approx(score_spectral_raw(var, risk, y, s, C)).epsilon(1e-14));
    const double h = 1e-6;
    for (std::size_t m = 0; m < 2; ++m) {
      auto up = var, down = var;
      up[m] += h;
      down[m] -= h;
      const double fd = (score_spectral_raw(up, risk, y, s, C) - score_spectral_raw(down, risk, y, s, C)) / (2 * h);
      CHECK(d_var[m] == doctest::Approx(fd).epsilon(1e-6).scale(1e-6));
    }
    const double fd_risk =
        (score_spectral_raw(var, risk + h, y, s, C) - score_spectral_raw(var, risk - h, y, s, C)) / (2 * h);
    CHECK(d_risk == doctest::Approx(fd_risk).epsilon(1e-6));
  }
}

TEST_CASE("two-atom spectral score minimizer recovers the VaR levels") {
  std::vector<double> y;
  for (int i = 1; i <= 10; ++i) y.push_back(i);
  const Spectrum s({0.5, 0.9}, {0.4, 0.6});
  const double C = 20.0, step = 0.1;
  // Risk fixed at the oracle value; search VaR levels on a grid.
  const double risk = empirical_spectral(y, s);
  double best = INFINITY, b0 = 0, b1 = 0;
  for (double a0 = 0.0; a0 <= 11.0 + 1e-9; a0 += step) {
    for (double a1 = a0; a1 <= 11.0 + 1e-9; a1 += step) {
      double total = 0.0;
      for (double v : y) total += score_spectral_raw(std::vector<double>{a0, a1}, risk, v, s, C);
      if (total < best - 1e-12) {
        best = total;
        b0 = a0;
        b1 = a1;
      }
    }
  }
  CHECK(std::abs((b0) - (empirical_var(y, 0.5))) <= step + 1e-9);
  CHECK(std::abs((b1) - (empirical_var(y, 0.9))) <= step + 1e-9);
}
