#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "optexec/closed_form.hpp"
#include "optexec/value_ode.hpp"

using namespace optexec;

namespace {
const MarketParams kCritical{-0.125, 0.5, 1.0, 1.0, 1.0};
const MarketParams kSubcritical{-0.3, 0.2, 1.0, 1.0, 1.0};
const MarketParams kSupercritical{-0.05, 0.4, 1.0, 1.0, 1.0};
}  // namespace

TEST_CASE("boundary-layer series against the critical closed form") {
  const CriticalParams cp = CriticalParams::from_market(kCritical);
  const auto [g0, p0] = series_init(kCritical, 1e-4);
  CHECK(p0 == doctest::Approx(g_critical_prime(1e-4, cp)).epsilon(1e-6));
  CHECK(g0 == doctest::Approx(g_critical(1e-4, cp)).epsilon(1e-6));

  SeriesCoeffs s(kCritical);
  CHECK(s.a == doctest::Approx(std::sqrt(2.0 * 0.125)));
  CHECK_THROWS_AS(series_init(kCritical, 1.0), CutoffTooLargeError);
  CHECK_THROWS_AS(series_init(kCritical, -1.0), std::invalid_argument);
  MarketParams bad = kCritical;
  bad.mu = 0.0;
  CHECK_THROWS_AS(SeriesCoeffs{bad}, RegimeError);
}

TEST_CASE("critical solve matches the closed form") {
  const auto vf = integrate_value_ode(kCritical);
  const CriticalParams cp = CriticalParams::from_market(kCritical);
  double dev = 0.0;
  for (int i = 0; i <= 60; ++i) {
    const double x = 0.01 * std::pow(1000.0, i / 60.0);  // [0.01, 10]
    dev = std::max(dev, std::abs(vf.g_at(x) - g_critical(x, cp)));
  }
  CHECK(dev <= 1e-5);
  CHECK(vf.g_prime_at(1.0) ==
        doctest::Approx(1.0 - h_ratio(1.0, cp)).epsilon(1e-5));

  const auto rep = validate(vf);
  CHECK(rep.monotone);
  CHECK(rep.concave);
  CHECK(rep.bounds_ok);
  CHECK(rep.residual_sup <= 1e-8);
}

TEST_CASE("subcritical solve reaches its plateau") {
  const auto vf = integrate_value_ode(kSubcritical);
  // g_inf = -1/(2 Lambda (2mu+sigma^2)) = 1/1.12
  const double g_inf = 1.0 / 1.12;
  CHECK(vf.g_at(50.0) == doctest::Approx(g_inf).epsilon(0.02));
  const auto rep = validate(vf);
  CHECK(rep.monotone);
  CHECK(rep.concave);
  CHECK(rep.bounds_ok);
  CHECK(rep.residual_sup <= 1e-8);
}

TEST_CASE("supercritical solve validates") {
  const auto vf = integrate_value_ode(kSupercritical);
  const auto rep = validate(vf);
  CHECK(rep.monotone);
  CHECK(rep.concave);
  CHECK(rep.bounds_ok);
  CHECK(rep.residual_sup <= 1e-8);
  CHECK(vf.g_at(1.0) > 0.5);
  CHECK(vf.g_at(1.0) < 1.0);
}

TEST_CASE("nonnegative drift is rejected") {
  MarketParams p = kCritical;
  p.mu = 0.1;
  CHECK_THROWS_WITH_AS(integrate_value_ode(p),
                       doctest::Contains("value is infinite for positive "
                                         "drift"),
                       RegimeError);
  p.mu = 0.0;
  CHECK_THROWS_AS(integrate_value_ode(p), RegimeError);
}

TEST_CASE("g and g' obey the hard bounds everywhere") {
  const auto vf = integrate_value_ode(kSubcritical);
  for (double x : {0.0, 1e-8, 1e-5, 1e-3, 0.1, 1.0, 10.0, 49.0, 200.0}) {
    const double p = vf.g_prime_at(x);
    CHECK(p >= 0.0);
    CHECK(p <= 1.0);
    const double g = vf.g_at(x);
    CHECK(g >= 0.0);
    CHECK(g <= x * (1.0 + 1e-12) + 1e-300);
  }
  CHECK(vf.g_at(0.0) == 0.0);
  CHECK(vf.g_prime_at(0.0) == 1.0);
  CHECK_THROWS_AS(vf.g_at(-1.0), std::invalid_argument);
  CHECK_THROWS_AS(vf.g_prime_at(-1.0), std::invalid_argument);
}

TEST_CASE("json round trip is bit exact") {
  const auto vf = integrate_value_ode(kCritical);
  const auto vf2 = value_function_from_json(to_json(vf));
  CHECK(vf2.x_grid == vf.x_grid);
  CHECK(vf2.g == vf.g);
  CHECK(vf2.g_prime == vf.g_prime);
  CHECK(vf2.residual_sup == vf.residual_sup);
  for (double x : {1e-5, 0.02, 1.0, 7.5, 60.0})
    CHECK(vf2.g_at(x) == vf.g_at(x));
}

TEST_CASE("value_of applies the scale reduction") {
  const auto vf = integrate_value_ode(kCritical);
  CHECK(vf.value_of(1.0, 1.0) == vf.g_at(1.0));
  CHECK(vf.value_of(2.0, 4.0) == 16.0 * vf.g_at(0.5));
}

TEST_CASE("requested series handover below stability is served by the series") {
  SolveOptions opt;
  opt.x0 = 1e-6;
  const auto vf = integrate_value_ode(kCritical, opt);
  // the grid start may be raised, but queries at 1e-6 still answer
  const SeriesCoeffs s(kCritical);
  CHECK(vf.g_prime_at(1e-6) == doctest::Approx(s.g_prime(1e-6)));
  CHECK(vf.x_series_cutoff >= 1e-6);
}

TEST_CASE("unresolvable grid requests fail loudly") {
  SolveOptions opt;
  opt.n_grid = 64;  // Peclet-stable start would leave series validity
  CHECK_THROWS_AS(integrate_value_ode(kSubcritical, opt), CutoffTooLargeError);
}
