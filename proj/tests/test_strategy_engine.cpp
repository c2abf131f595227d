#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "optexec/strategy_engine.hpp"
#include "optexec/value_ode.hpp"

using namespace optexec;

namespace {

// constant-price path (sigma ~ 0 so the bridge correction is inert)
PricePath flat_path(double s, double horizon, int n_steps) {
  PricePath p;
  p.times = uniform_grid(horizon, n_steps);
  p.prices.assign(p.times.size(), s);
  return p;
}

const MarketParams kFlat{-0.125, 1e-9, 1.0, 1.0, 1.0};

}  // namespace

TEST_CASE("policy constructors") {
  CHECK_THROWS_AS(exponential_rate(0.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(constant_rate(-1.0, 1.0), std::invalid_argument);
  const auto e = exponential_rate(0.5, 2.0);
  CHECK(e.name == "exponential_rate_c=0.5");
  CHECK(e.rate(0.0, 1.0, 1.0) == doctest::Approx(-1.0));
  const auto c = constant_rate(4.0, 2.0);
  CHECK(c.rate(1.0, 1.0, 1.0) == doctest::Approx(-0.5));
  CHECK(c.rate(5.0, 1.0, 1.0) == 0.0);
}

TEST_CASE("exponential policy on a flat path matches the analytic integrals") {
  const double cexp = 0.5, T = 8.0, s = 3.0;
  const auto path = flat_path(s, T, 400);
  const auto res = simulate_execution(exponential_rate(cexp, 1.0), path, 1.0,
                                      4, kFlat);
  // revenue = s(1 - e^{-cT}), impact = (Lambda/2)(c/2)(1 - e^{-2cT})
  const double rev = s * -std::expm1(-cexp * T);
  const double imp = 0.5 * 0.5 * cexp * -std::expm1(-2.0 * cexp * T);
  CHECK(res.revenue_cum.back() == doctest::Approx(rev).epsilon(1e-6));
  CHECK(res.impact_cost_cum.back() == doctest::Approx(imp).epsilon(1e-6));
  CHECK(res.v_realized ==
        doctest::Approx(rev - imp).epsilon(1e-6));
  CHECK(res.inventory.back() ==
        doctest::Approx(std::exp(-cexp * T)).epsilon(1e-6));
}

TEST_CASE("optimal feedback on a flat path tracks the reduced ODE") {
  MarketParams p{-0.125, 0.5, 1.0, 1.0, 1.0};
  const auto vf = integrate_value_ode(p);
  const auto policy = optimal_feedback(vf);
  const double T = 5.0;
  const auto path = flat_path(1.0, T, 500);
  const auto res = simulate_execution(policy, path, 1.0, 10, p);

  // independent fine RK4 of phi' = -(1/Lambda)(1 - g'(phi)) at s = 1
  auto f = [&](double phi) {
    return phi <= 0.0 ? 0.0 : -(1.0 - vf.g_prime_at(phi));
  };
  double phi = 1.0;
  const int n = 200000;
  const double h = T / n;
  for (int k = 0; k < n; ++k) {
    const double k1 = f(phi);
    const double k2 = f(phi + 0.5 * h * k1);
    const double k3 = f(phi + 0.5 * h * k2);
    const double k4 = f(phi + h * k3);
    phi += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (phi < 0.0) phi = 0.0;
  }
  CHECK(res.inventory.back() == doctest::Approx(phi).epsilon(5e-3));
}

TEST_CASE("positive rates are an admissibility violation") {
  const auto buying = custom_policy("buyer", [](double, double, double) {
    return 0.5;
  });
  const auto path = flat_path(1.0, 1.0, 8);
  CHECK_THROWS_AS(simulate_execution(buying, path, 1.0, 1, kFlat),
                  AdmissibilityError);
}

TEST_CASE("absorption at zero inventory") {
  // constant rate exhausts phi0 = 1 at t = 2 on a horizon of 4
  const auto path = flat_path(1.0, 4.0, 64);
  const auto res =
      simulate_execution(constant_rate(2.0, 1.0), path, 1.0, 8, kFlat);
  CHECK(res.hit_time == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(res.inventory.back() == 0.0);
  for (std::size_t k = 0; k + 1 < res.inventory.size(); ++k)
    CHECK(res.inventory[k + 1] <= res.inventory[k]);
  for (double r : res.rate) CHECK(r <= 0.0);
  // revenue stops accruing after the hit
  CHECK(res.revenue_cum.back() == doctest::Approx(1.0).epsilon(1e-9));
  // starting flat: absorbed immediately
  const auto res0 =
      simulate_execution(constant_rate(2.0, 1.0), path, 0.0, 1, kFlat);
  CHECK(res0.hit_time == 0.0);
  CHECK(res0.v_realized == 0.0);
}

TEST_CASE("parameter mismatch is rejected") {
  MarketParams p{-0.125, 0.5, 1.0, 1.0, 1.0};
  const auto vf = integrate_value_ode(p);
  MarketParams q = p;
  q.sigma = 0.4;
  CHECK_THROWS_AS(optimal_feedback_checked(vf, q), ConfigurationError);
  CHECK_NOTHROW(optimal_feedback_checked(vf, p));
}

TEST_CASE("pathwise revenue bound") {
  MarketParams p{-0.125, 0.5, 1.0, 1.0, 1.0};
  const auto vf = integrate_value_ode(p);
  const auto policy = optimal_feedback(vf);
  const auto grid = uniform_grid(20.0, 256);
  for (std::uint64_t i = 0; i < 20; ++i) {
    const auto path = simulate_gbm(p, grid, 7777, i);
    const auto res = simulate_execution(policy, path, p.phi0, 4, p);
    const double smax =
        *std::max_element(path.prices.begin(), path.prices.end());
    CHECK(res.revenue_cum.back() <= p.phi0 * smax * (1.0 + 1e-12));
    CHECK(res.revenue_cum.back() >= 0.0);
  }
}

TEST_CASE("supermartingale diagnostic evaluates S g'") {
  MarketParams p{-0.125, 0.5, 1.0, 1.0, 1.0};
  const auto vf = integrate_value_ode(p);
  const auto grid = uniform_grid(5.0, 32);
  const auto path = simulate_gbm(p, grid, 5, 0);
  const auto res =
      simulate_execution(optimal_feedback(vf), path, p.phi0, 4, p);
  const auto mp = supermartingale_diagnostic(res, path, vf);
  REQUIRE(mp.m.size() == grid.size());
  CHECK(mp.m[0] == p.s0 * vf.g_prime_at(p.phi0 / p.s0));
  for (std::size_t k = 0; k < mp.m.size(); ++k) {
    CHECK(mp.m[k] >= 0.0);
    CHECK(mp.m[k] <= path.prices[k]);  // g' <= 1
  }
}

TEST_CASE("execution csv format") {
  const auto path = flat_path(1.0, 1.0, 4);
  const auto res =
      simulate_execution(constant_rate(2.0, 1.0), path, 1.0, 1, kFlat);
  std::ostringstream os;
  write_csv(res, path, os);
  CHECK(os.str().rfind("t,S,phi_rate,inventory,revenue_cum,impact_cost_cum,M",
                       0) == 0);
}
