#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "optexec/market_model.hpp"

using namespace optexec;

TEST_CASE("parameter validation") {
  MarketParams p;
  CHECK_NOTHROW(p.validate());
  p.sigma = 0.0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = MarketParams{};
  p.lambda_impact = -1.0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = MarketParams{};
  p.s0 = 0.0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = MarketParams{};
  p.phi0 = -0.5;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = MarketParams{};
  p.mu = std::nan("");
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
}

TEST_CASE("regime classification") {
  MarketParams p{-0.125, 0.5, 1.0, 1.0, 1.0};
  auto r = classify_regime(p);
  CHECK(r.drift == DriftRegime::NegativeDrift);
  CHECK(r.critical);  // 2*(-0.125) + 0.25 = 0

  p.mu = -0.3;
  r = classify_regime(p);
  CHECK(r.drift == DriftRegime::NegativeDrift);
  CHECK_FALSE(r.critical);

  p.mu = 0.0;
  CHECK(classify_regime(p).drift == DriftRegime::Martingale);
  p.mu = 0.1;
  CHECK(classify_regime(p).drift == DriftRegime::PositiveDrift);
}

TEST_CASE("uniform grid") {
  const auto t = uniform_grid(2.0, 4);
  REQUIRE(t.size() == 5);
  CHECK(t.front() == 0.0);
  CHECK(t.back() == 2.0);
  CHECK(t[1] == doctest::Approx(0.5));
  CHECK_THROWS_AS(uniform_grid(-1.0, 4), std::invalid_argument);
  CHECK_THROWS_AS(uniform_grid(1.0, 0), std::invalid_argument);
}

TEST_CASE("gbm paths are reproducible and positive") {
  MarketParams p{-0.125, 0.5, 1.0, 2.0, 1.0};
  const auto grid = uniform_grid(5.0, 64);
  const auto a = simulate_gbm(p, grid, 1234, 7);
  const auto b = simulate_gbm(p, grid, 1234, 7);
  REQUIRE(a.prices.size() == grid.size());
  CHECK(a.prices == b.prices);  // bitwise determinism
  for (double s : a.prices) CHECK(s > 0.0);
  CHECK(a.prices[0] == 2.0);

  const auto c = simulate_gbm(p, grid, 1234, 8);
  CHECK(c.prices != a.prices);
  const auto d = simulate_gbm(p, grid, 4321, 7);
  CHECK(d.prices != a.prices);
}

TEST_CASE("antithetic paths mirror the log returns") {
  MarketParams p{-0.1, 0.3, 1.0, 1.0, 1.0};
  const auto grid = uniform_grid(3.0, 48);
  const auto a = simulate_gbm(p, grid, 99, 3, false);
  const auto m = simulate_gbm(p, grid, 99, 3, true);
  // log S + log S_anti = 2 * deterministic drift part
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double det = (p.mu - 0.5 * p.sigma * p.sigma) * grid[k];
    CHECK(std::log(a.prices[k]) + std::log(m.prices[k]) ==
          doctest::Approx(2.0 * det).epsilon(1e-10));
  }
}

TEST_CASE("gbm rejects malformed grids") {
  MarketParams p;
  std::vector<double> bad1{0.5, 1.0};           // must start at 0
  std::vector<double> bad2{0.0, 1.0, 1.0};      // strictly increasing
  std::vector<double> bad3{0.0};
  CHECK_THROWS_AS(simulate_gbm(p, bad1, 1, 0), std::invalid_argument);
  CHECK_THROWS_AS(simulate_gbm(p, bad2, 1, 0), std::invalid_argument);
  CHECK_THROWS_AS(simulate_gbm(p, bad3, 1, 0), std::invalid_argument);
}

TEST_CASE("counter rng stream statistics") {
  CounterRng r1(42, 0), r2(42, 0), r3(42, 1);
  double sum = 0.0, sumsq = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double z = r1.normal();
    CHECK(z == r2.normal());
    sum += z;
    sumsq += z * z;
  }
  CHECK(std::abs(sum / n) < 0.02);
  CHECK(sumsq / n == doctest::Approx(1.0).epsilon(0.02));
  // independent stream decorrelates
  double dot = 0.0;
  CounterRng r4(42, 0);
  for (int i = 0; i < n; ++i) dot += r3.normal() * r4.normal();
  CHECK(std::abs(dot / n) < 0.02);
}
