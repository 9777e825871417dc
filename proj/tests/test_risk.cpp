#include <doctest.h>

#include <cmath>
#include <random>

#include "drrho/error.hpp"
#include "drrho/risk.hpp"
#include "oracles.hpp"

using namespace drrho;

TEST_CASE("log_mean_exp is stable where direct evaluation overflows") {
  const std::vector<double> x{1000.0, 1000.0, 999.0};
  const double expect = 1000.0 + std::log((2.0 + std::exp(-1.0)) / 3.0);
  CHECK(log_mean_exp(x) == doctest::Approx(expect).epsilon(1e-15));
  const std::vector<double> tiny{-1000.0, -1001.0};
  CHECK(std::isfinite(log_mean_exp(tiny)));
}

TEST_CASE("LossVector rejects non-finite and out-of-bound entries") {
  CHECK_THROWS_AS(LossVector(std::vector<double>{1.0, NAN}), ArgumentError);
  CHECK_THROWS_AS(LossVector(std::vector<double>{1.0, INFINITY}), ArgumentError);
  CHECK_THROWS_AS(LossVector({1.0, 3.0}, 0.0, 2.0), ArgumentError);
  CHECK_NOTHROW(LossVector({1.0, 2.0}, 0.0, 2.0));
}

TEST_CASE("cvar_topk") {
  const LossVector l(std::vector<double>{0.3, 0.9, 0.1, 0.5});
  CHECK(cvar_topk(l, 1) == 0.9);
  CHECK(cvar_topk(l, 4) == doctest::Approx(0.45).epsilon(1e-15));
  CHECK(cvar_topk(l, 2) == doctest::Approx(0.7).epsilon(1e-15));
  CHECK_THROWS_AS(cvar_topk(l, 0), ArgumentError);
  CHECK_THROWS_AS(cvar_topk(l, 5), ArgumentError);
  CHECK_THROWS_AS(cvar_topk(LossVector{}, 1), ArgumentError);
}

TEST_CASE("softmax_weights and kl_regularized_risk against long double evaluation") {
  std::mt19937_64 gen(11);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + gen() % 30;
    const auto l = oracle::random_vector(gen, n, -2.0, 2.0);
    const double tau = std::exp(std::uniform_real_distribution<double>(std::log(0.05), std::log(5.0))(gen));
    const auto p = softmax_weights(l, tau);
    const auto q = oracle::softmax(l, tau);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(std::abs(p[i] - static_cast<double>(q[i])) <= 1e-10);
      sum += p[i];
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(kl_regularized_risk(l, tau) - static_cast<double>(oracle::kl_regularized(l, tau))) <= 1e-10);
    const std::size_t k = 1 + gen() % n;
    CHECK(std::abs(cvar_topk(l, k) - static_cast<double>(oracle::topk_mean(l, k))) <= 1e-10);
  }
}

TEST_CASE("kl_regularized_risk limits") {
  const std::vector<double> l{0.1, 0.7, -0.4, 0.2};
  CHECK(kl_regularized_risk(l, 1e-4) == doctest::Approx(0.7).epsilon(1e-3));
  CHECK(kl_regularized_risk(l, 1e4) == doctest::Approx(0.15).epsilon(1e-3));
  CHECK_THROWS_AS(kl_regularized_risk(l, 0.0), ArgumentError);
  CHECK_THROWS_AS(softmax_weights(l, -1.0), ArgumentError);
}

TEST_CASE("kl_constrained_risk against a grid over log tau") {
  std::mt19937_64 gen(5);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = 3 + gen() % 8;
    const auto l = oracle::random_vector(gen, n, -1.0, 1.0);
    const double rho = std::uniform_real_distribution<double>(0.01, 2.0)(gen);
    const auto b = kl_tau_bounds(l);
    const auto r = kl_constrained_risk(l, rho, n);
    const auto grid = oracle::kl_constrained_grid(l, rho, n, b.lo, b.hi, 200000);
    CHECK(std::abs(r.risk - static_cast<double>(grid)) <= 1e-6);
    CHECK(r.tau_star >= b.lo);
    CHECK(r.tau_star <= b.hi);
  }
}

TEST_CASE("kl_constrained_risk edge cases") {
  SUBCASE("constant losses give the constant up to tau_min * rho / n") {
    const auto r = kl_constrained_risk(std::vector<double>(5, 0.3), 0.05, 5);
    CHECK(r.risk >= 0.3);
    CHECK(r.risk - 0.3 <= 1e-8);
  }
  SUBCASE("grid example: five entries, rho = 2, n = 5") {
    const std::vector<double> l{0.2, -0.7, 1.3, 0.4, 0.0};
    const auto b = kl_tau_bounds(l);
    CHECK(std::abs(kl_constrained_risk(l, 2.0, 5).risk -
                   static_cast<double>(oracle::kl_constrained_grid(l, 2.0, 5, b.lo, b.hi, 1000000))) <= 1e-6);
  }
  SUBCASE("rho = 0 gives the mean") {
    const std::vector<double> l{0.1, 0.5, 0.9};
    CHECK(kl_constrained_risk(l, 0.0, 3).risk == doctest::Approx(0.5).epsilon(1e-7));
  }
  SUBCASE("risk lies between mean and max") {
    const std::vector<double> l{0.1, 0.5, 0.9, -0.2};
    const double r = kl_constrained_risk(l, 0.5, 4).risk;
    CHECK(r >= 0.325 - 1e-12);
    CHECK(r <= 0.9 + 1e-12);
  }
  CHECK_THROWS_AS(kl_constrained_risk(std::vector<double>{1.0}, -1.0, 1), ArgumentError);
}

TEST_CASE("project_to_simplex") {
  const auto p = project_to_simplex(std::vector<double>{0.2, 0.3, 0.5});
  CHECK(p[0] == doctest::Approx(0.2));
  CHECK(p[2] == doctest::Approx(0.5));
  const auto q = project_to_simplex(std::vector<double>{2.0, 0.0, -1.0});
  CHECK(q[0] == doctest::Approx(1.0));
  CHECK(q[1] == 0.0);
  CHECK(q[2] == 0.0);
}

TEST_CASE("chi2_dro_risk against a zoomed simplex grid for n <= 4") {
  std::mt19937_64 gen(17);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t n = 2 + gen() % 3;
    const auto l = oracle::random_vector(gen, n, -1.0, 1.0);
    const double rho = std::exp(std::uniform_real_distribution<double>(std::log(0.01), std::log(4.0))(gen));
    const auto r = chi2_dro_risk(l, rho, n);
    CHECK(std::abs(r.risk - oracle::chi2_grid(l, rho, n)) <= 1e-5);
    double sum = 0.0, dist = 0.0;
    for (double w : r.weights) {
      CHECK(w >= 0.0);
      sum += w;
      dist += (w - 1.0 / n) * (w - 1.0 / n);
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(dist <= 2.0 * rho / (n * n) + 1e-12);
  }
}

TEST_CASE("chi2_dro_risk interior closed form") {
  std::mt19937_64 gen(23);
  int interior = 0;
  for (int trial = 0; trial < 200 && interior < 50; ++trial) {
    const std::size_t n = 5 + gen() % 20;
    const auto l = oracle::random_vector(gen, n, 0.0, 1.0);
    const LossVector lv(l);
    double var = 0.0;
    for (double x : l) var += (x - lv.mean()) * (x - lv.mean());
    const double sd = std::sqrt(var / n);
    // Small enough radius that every weight stays positive.
    double rho = 0.0;
    const double lo = lv.min() - lv.mean();
    if (lo < 0.0) rho = 0.25 * n * std::pow(sd / lo, 2);
    if (!(rho > 0.0)) continue;
    ++interior;
    const double closed = lv.mean() + sd * std::sqrt(2.0 * rho / n);
    CHECK(std::abs(chi2_dro_risk(l, rho, n).risk - closed) <= 1e-8);
  }
  CHECK(interior >= 20);
}

TEST_CASE("chi2_dro_risk two-point example") {
  const auto r = chi2_dro_risk(std::vector<double>{0.0, 1.0}, 0.08, 2);
  CHECK(r.risk == doctest::Approx(0.5 + 0.5 * std::sqrt(0.08)).epsilon(1e-12));
  CHECK(std::abs(r.risk - 0.641421) < 1e-6);
}

TEST_CASE("chi2_dro_risk degenerate cases") {
  CHECK(chi2_dro_risk(std::vector<double>(4, 0.25), 1.0, 4).risk == doctest::Approx(0.25));
  const std::vector<double> l{0.1, 0.4, 0.9};
  CHECK(chi2_dro_risk(l, 0.0, 3).risk == doctest::Approx(LossVector(l).mean()).epsilon(1e-14));
  CHECK(chi2_dro_risk(l, 1e6, 3).risk == doctest::Approx(0.9).epsilon(1e-14));
  CHECK_THROWS_AS(chi2_dro_risk(l, -0.1, 3), ArgumentError);
}

TEST_CASE("drrho_shift and evaluate_risk") {
  const LossVector t(std::vector<double>{1.0, 2.0, 3.0});
  const LossVector r(std::vector<double>{0.5, 2.5, 1.0});
  const auto s = drrho_shift(t, r);
  CHECK(s[0] == 0.5);
  CHECK(s[1] == -0.5);
  CHECK(s[2] == 2.0);
  CHECK_THROWS_AS(drrho_shift(t, LossVector(std::vector<double>{1.0})), ArgumentError);

  RiskSpec rs;
  rs.kind = RiskKind::cvar_topk;
  rs.k = 1;
  CHECK(evaluate_risk(s, rs) == 2.0);
  rs.kind = RiskKind::kl_regularized;
  rs.tau = 0.5;
  CHECK(evaluate_risk(s, rs) == kl_regularized_risk(s, 0.5));
  rs.tau = 0.0;
  CHECK_THROWS_AS(evaluate_risk(s, rs), ArgumentError);
  rs.kind = RiskKind::chi2_constrained;
  rs.rho = 0.1;
  CHECK(evaluate_risk(s, rs) == chi2_dro_risk(s, 0.1, 3).risk);
  rs.kind = RiskKind::kl_constrained;
  CHECK(evaluate_risk(s, rs) == kl_constrained_risk(s, 0.1, 3).risk);
}
