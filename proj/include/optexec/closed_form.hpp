#pragma once

#include <cmath>
#include <ostream>
#include <stdexcept>

#include "optexec/market_model.hpp"

namespace optexec {

// Critical regime 2*mu + sigma^2 = 0 (S^2 is a martingale). Here the value
// ODE has an explicit solution built from the ratio of two power series,
// equivalently a ratio of modified Bessel functions I1/I0.
struct CriticalParams {
  double sigma;
  double lambda_impact;

  CriticalParams(double sigma_, double lambda_) : sigma(sigma_), lambda_impact(lambda_) {
    if (!(sigma > 0.0) || !(lambda_impact > 0.0))
      throw std::invalid_argument("CriticalParams: sigma, lambda must be > 0");
  }

  static CriticalParams from_market(const MarketParams& p,
                                    double tol_critical = 1e-12) {
    if (std::abs(2.0 * p.mu + p.sigma * p.sigma) > tol_critical)
      throw std::invalid_argument("params are not critical (2*mu+sigma^2 != 0)");
    return CriticalParams(p.sigma, p.lambda_impact);
  }

  double mu() const { return -0.5 * sigma * sigma; }
  MarketParams market(double s0 = 1.0, double phi0 = 1.0) const {
    return MarketParams{mu(), sigma, lambda_impact, s0, phi0};
  }
};

namespace detail {

// Ratio of the two power series in q:
//   num = sum q^n / ((n+1) n!^2),  den = sum q^n / n!^2  (= I0(2 sqrt(q))).
// Terms are accumulated until they drop below 1e-18 of the running sum.
inline double h_of_q_series(double q) {
  double den_term = 1.0, den = 1.0, num = 1.0;
  for (int n = 1; n < 400; ++n) {
    den_term *= q / (static_cast<double>(n) * n);
    den += den_term;
    num += den_term / (n + 1);
    if (den_term < 1e-18 * den) break;
  }
  return num / den;
}

// I_{nu}(z) asymptotic series factor for large z (the e^z/sqrt(2 pi z) prefactor
// cancels in the ratio).
inline double bessel_i_asymptotic_sum(int nu, double z) {
  const double m = 4.0 * nu * nu;
  double term = 1.0, sum = 1.0, prev = 1.0;
  for (int k = 1; k < 60; ++k) {
    const double f = 2.0 * k - 1.0;
    term *= -(m - f * f) / (8.0 * z * k);
    if (std::abs(term) > std::abs(prev)) break;  // divergence onset
    sum += term;
    prev = term;
    if (std::abs(term) < 1e-18 * std::abs(sum)) break;
  }
  return sum;
}

// h(q) = I1(2 sqrt(q)) / (sqrt(q) I0(2 sqrt(q))) via the asymptotic ratio.
inline double h_of_q_asymptotic(double q) {
  const double z = 2.0 * std::sqrt(q);
  const double r = bessel_i_asymptotic_sum(1, z) / bessel_i_asymptotic_sum(0, z);
  return r / std::sqrt(q);
}

constexpr double kQSwitch = 100.0;

inline double h_of_q(double q) {
  return q <= kQSwitch ? h_of_q_series(q) : h_of_q_asymptotic(q);
}

// Adaptive Simpson on [a,b] with absolute tolerance.
template <class F>
double simpson_rec(F&& f, double a, double b, double fa, double fm, double fb,
                   double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol)
    return left + right + delta / 15.0;
  return simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

template <class F>
double adaptive_simpson(F&& f, double a, double b, double tol) {
  if (!(b > a)) return 0.0;
  const double m = 0.5 * (a + b);
  const double fa = f(a), fm = f(m), fb = f(b);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return simpson_rec(f, a, b, fa, fm, fb, whole, tol, 48);
}

}  // namespace detail

// h(y) = I1(z)/(sqrt(q) I0(z)), z = 2 sqrt(q), q = y/(Lambda sigma^2).
// Nonincreasing, h(0+)=1, h(inf)=0.
inline double h_ratio(double y, const CriticalParams& p) {
  if (!(y > 0.0)) throw std::invalid_argument("h_ratio: y must be > 0");
  return detail::h_of_q(y / (p.lambda_impact * p.sigma * p.sigma));
}

// g'(x) = 1 - h(1/x); the x=0 limit is 1.
inline double g_critical_prime(double x, const CriticalParams& p) {
  if (!(x >= 0.0)) throw std::invalid_argument("g_critical_prime: x >= 0");
  if (x == 0.0) return 1.0;
  return 1.0 - h_ratio(1.0 / x, p);
}

// g(x) = int_0^x (1 - h(1/z)) dz.  Near z=0 the integrand is
// 1 - sqrt(Lambda sigma^2 z) + O(z), so the [0, min(x,1)] panel is mapped by
// z = w^2 which makes it smooth; the rest is integrated directly.
inline double g_critical(double x, const CriticalParams& p) {
  if (!(x >= 0.0)) throw std::invalid_argument("g_critical: x >= 0");
  if (x == 0.0) return 0.0;
  const double tol = 1e-11 * (1.0 + x);
  const double zb = std::min(x, 1.0);
  const auto integrand = [&](double z) { return 1.0 - h_ratio(1.0 / z, p); };
  const auto mapped = [&](double w) {
    return w == 0.0 ? 0.0 : 2.0 * w * integrand(w * w);
  };
  double g = detail::adaptive_simpson(mapped, 0.0, std::sqrt(zb), 0.5 * tol);
  if (x > zb) g += detail::adaptive_simpson(integrand, zb, x, 0.5 * tol);
  return g;
}

// Optimal feedback rate in the critical case: -(s/Lambda) * h(s/phi scaled),
// i.e. -(s/Lambda)(1 - g'(phi/s)).
inline double optimal_rate_critical(double s, double phi,
                                    const CriticalParams& p) {
  if (!(s > 0.0)) throw std::invalid_argument("optimal_rate_critical: s > 0");
  if (!(phi >= 0.0))
    throw std::invalid_argument("optimal_rate_critical: phi >= 0");
  if (phi == 0.0) return 0.0;
  const double x = phi / s;
  return -(s / p.lambda_impact) * h_ratio(1.0 / x, p);
}

inline void write_h_table_csv(const CriticalParams& p, std::span<const double> ys,
                              std::ostream& os) {
  os << "y,h\n";
  char buf[64];
  for (double y : ys) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", y, h_ratio(y, p));
    os << buf;
  }
}

inline void write_g_table_csv(const CriticalParams& p, std::span<const double> xs,
                              std::ostream& os) {
  os << "x,g\n";
  char buf[64];
  for (double x : xs) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", x, g_critical(x, p));
    os << buf;
  }
}

}  // namespace optexec
