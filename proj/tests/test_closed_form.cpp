#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "optexec/closed_form.hpp"

using namespace optexec;

TEST_CASE("construction and regime gating") {
  CHECK_THROWS_AS(CriticalParams(0.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(CriticalParams(0.5, -1.0), std::invalid_argument);
  MarketParams sub{-0.3, 0.2, 1.0, 1.0, 1.0};
  CHECK_THROWS_AS(CriticalParams::from_market(sub), std::invalid_argument);
  MarketParams crit{-0.125, 0.5, 1.0, 1.0, 1.0};
  const auto cp = CriticalParams::from_market(crit);
  CHECK(cp.mu() == doctest::Approx(-0.125));
  CHECK(cp.market().mu == cp.mu());
}

TEST_CASE("Bessel ratio spot value via independent partial sums") {
  // h(Lambda sigma^2) = I1(2)/I0(2): sums of 1/((n+1) n!^2) and 1/n!^2
  double fact2 = 1.0, num = 0.0, den = 0.0;
  for (int n = 0; n < 14; ++n) {
    if (n > 0) fact2 *= static_cast<double>(n) * n;
    num += 1.0 / ((n + 1.0) * fact2);
    den += 1.0 / fact2;
  }
  const double expected = num / den;
  CHECK(expected == doctest::Approx(0.697775).epsilon(1e-6));

  const CriticalParams cp(0.5, 1.0);
  const double y = cp.lambda_impact * cp.sigma * cp.sigma;
  CHECK(h_ratio(y, cp) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("h is nonincreasing with the right limits") {
  const CriticalParams cp(0.5, 1.0);
  double prev = 1.0;
  for (double y : {1e-6, 1e-3, 0.1, 1.0, 10.0, 1e3, 1e5}) {
    const double h = h_ratio(y, cp);
    CHECK(h > 0.0);
    CHECK(h <= prev);
    prev = h;
  }
  CHECK(h_ratio(1e-8, cp) == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(h_ratio(1e6, cp) < 1e-2);
  CHECK_THROWS_AS(h_ratio(0.0, cp), std::invalid_argument);
}

TEST_CASE("series and asymptotic branches agree at the switch") {
  // q = 100 sits exactly at the branch switch
  const double a = detail::h_of_q_series(100.0);
  const double b = detail::h_of_q_asymptotic(100.0);
  CHECK(a == doctest::Approx(b).epsilon(1e-12));
}

TEST_CASE("g' is the derivative of g") {
  const CriticalParams cp(0.5, 1.0);
  CHECK(g_critical(0.0, cp) == 0.0);
  CHECK(g_critical_prime(0.0, cp) == 1.0);
  for (double x : {0.05, 0.3, 1.0, 4.0}) {
    const double e = 1e-5 * x;
    const double fd =
        (g_critical(x + e, cp) - g_critical(x - e, cp)) / (2.0 * e);
    CHECK(fd == doctest::Approx(g_critical_prime(x, cp)).epsilon(1e-7));
  }
  // concavity: derivative decreasing
  CHECK(g_critical_prime(0.1, cp) > g_critical_prime(1.0, cp));
  CHECK(g_critical_prime(1.0, cp) > g_critical_prime(10.0, cp));
}

TEST_CASE("optimal critical rate") {
  const CriticalParams cp(0.5, 1.0);
  CHECK(optimal_rate_critical(1.0, 0.0, cp) == 0.0);
  CHECK(optimal_rate_critical(1.0, 1.0, cp) < 0.0);
  // rate = -(s/Lambda)(1 - g'(phi/s))
  const double r = optimal_rate_critical(2.0, 1.0, cp);
  CHECK(r == doctest::Approx(-2.0 * (1.0 - g_critical_prime(0.5, cp))));
  CHECK_THROWS_AS(optimal_rate_critical(0.0, 1.0, cp), std::invalid_argument);
  CHECK_THROWS_AS(optimal_rate_critical(1.0, -1.0, cp), std::invalid_argument);
}

TEST_CASE("csv tables") {
  const CriticalParams cp(0.5, 1.0);
  std::vector<double> xs{0.5, 1.0, 2.0};
  std::ostringstream h_os, g_os;
  write_h_table_csv(cp, xs, h_os);
  write_g_table_csv(cp, xs, g_os);
  const std::string h_csv = h_os.str(), g_csv = g_os.str();
  CHECK(h_csv.substr(0, 4) == "y,h\n");
  CHECK(g_csv.substr(0, 4) == "x,g\n");
  CHECK(std::count(h_csv.begin(), h_csv.end(), '\n') == 4);
}
