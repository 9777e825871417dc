#include <doctest.h>

#include <cmath>

#include "drrho/error.hpp"
#include "drrho/optim.hpp"

using namespace drrho;

TEST_CASE("AdamW matches a hand-unrolled update") {
  AdamWConfig c{0.9, 0.98, 1e-8, 0.1};
  AdamW opt(2, c);
  std::vector<double> p{1.0, -2.0};
  const std::vector<double> g1{0.5, -0.1}, g2{0.2, 0.3};
  const double lr = 0.01;
  opt.step(p, g1, lr);
  opt.step(p, g2, lr);

  double q[2] = {1.0, -2.0}, m[2] = {0, 0}, v[2] = {0, 0};
  for (int t = 1; t <= 2; ++t) {
    const auto& g = t == 1 ? g1 : g2;
    for (int k = 0; k < 2; ++k) {
      m[k] = 0.9 * m[k] + 0.1 * g[k];
      v[k] = 0.98 * v[k] + 0.02 * g[k] * g[k];
      const double mh = m[k] / (1 - std::pow(0.9, t)), vh = v[k] / (1 - std::pow(0.98, t));
      q[k] = q[k] * (1 - lr * 0.1) - lr * mh / (std::sqrt(vh) + 1e-8);
    }
  }
  CHECK(p[0] == doctest::Approx(q[0]).epsilon(1e-15));
  CHECK(p[1] == doctest::Approx(q[1]).epsilon(1e-15));
  CHECK(opt.steps() == 2);
}

TEST_CASE("AdamW first step moves each coordinate by about lr") {
  AdamW opt(3, AdamWConfig{0.9, 0.98, 1e-8, 0.0});
  std::vector<double> p{0.0, 0.0, 0.0};
  opt.step(p, std::vector<double>{3.0, -0.001, 1e3}, 0.1);
  CHECK(p[0] == doctest::Approx(-0.1).epsilon(1e-6));
  CHECK(p[1] == doctest::Approx(0.1).epsilon(1e-4));
  CHECK(p[2] == doctest::Approx(-0.1).epsilon(1e-6));
}

TEST_CASE("AdamW restore resumes identically") {
  AdamW a(2, {}), b(2, {});
  std::vector<double> p{1.0, 2.0};
  a.step(p, std::vector<double>{0.1, 0.2}, 0.1);
  b.restore(a.first_moment(), a.second_moment(), a.steps());
  std::vector<double> q = p;
  a.step(p, std::vector<double>{0.3, -0.2}, 0.1);
  b.step(q, std::vector<double>{0.3, -0.2}, 0.1);
  CHECK(p == q);
  CHECK(a == b);
  CHECK_THROWS_AS(a.step(p, std::vector<double>{1.0}, 0.1), ArgumentError);
  CHECK_THROWS_AS(b.restore({1.0}, {1.0, 2.0}, 1), ArgumentError);
}

TEST_CASE("learning-rate schedule: linear warmup then cosine to zero") {
  const LrSchedule s{1.0, 4, 14};
  CHECK(s.at(0) == doctest::Approx(0.25));
  CHECK(s.at(3) == doctest::Approx(1.0));
  CHECK(s.at(4) == doctest::Approx(1.0));
  CHECK(s.at(9) == doctest::Approx(0.5));
  CHECK(s.at(14) == doctest::Approx(0.0));
  CHECK(s.at(100) == doctest::Approx(0.0));
  const LrSchedule flat{0.5, 0, 0};
  CHECK(flat.at(0) == 0.5);
}
