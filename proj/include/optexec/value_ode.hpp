#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <ostream>
#include <utility>
#include <vector>

#include "json.hpp"
#include "optexec/errors.hpp"
#include "optexec/market_model.hpp"

namespace optexec {

// Boundary-layer expansion coefficients at x=0 for the stationary value ODE
//   (sigma^2 x^2 / 2) g'' - (mu+sigma^2) x g' + (2mu+sigma^2) g
//     + (1-g')^2 / (2 Lambda) = 0,
// written as 1 - g'(x) = a sqrt(x) + b x + c x^{3/2} + O(x^2).  Matching
// orders x, x^{3/2}, x^2 gives a, b, c below (mu < 0 required).
struct SeriesCoeffs {
  double a, b, c;

  explicit SeriesCoeffs(const MarketParams& p) {
    if (!(p.mu < 0.0)) throw RegimeError("series expansion requires mu < 0");
    const double s2 = p.sigma * p.sigma;
    a = std::sqrt(2.0 * p.lambda_impact * (-p.mu));
    b = p.lambda_impact * (p.mu / 3.0 - s2 / 12.0);
    c = -b * b / (2.0 * a);
  }

  double g_prime(double x) const {
    const double r = std::sqrt(x);
    return 1.0 - (a * r + b * x + c * x * r);
  }
  double g(double x) const {
    const double r = std::sqrt(x);
    return x - ((2.0 / 3.0) * a * x * r + 0.5 * b * x * x +
                0.4 * c * x * x * r);
  }
  // Size of the first dropped order relative to the leading one.
  double next_term_ratio(double x) const {
    return std::abs(b) * std::sqrt(x) / a;
  }
};

inline std::pair<double, double> series_init(const MarketParams& p, double x0) {
  p.validate();
  SeriesCoeffs s(p);
  if (!(x0 > 0.0)) throw std::invalid_argument("series_init: x0 must be > 0");
  if (s.next_term_ratio(x0) > 0.01)
    throw CutoffTooLargeError("series_init: x0 too large for series validity");
  return {s.g(x0), s.g_prime(x0)};
}

struct SolveOptions {
  double x_max = 50.0;
  double tol = 1e-10;     // kept in the artifact metadata
  int n_grid = 32768;     // log-spaced output points in [x_cut, x_max]
  double x0 = 0.0;        // requested series handover; 0 -> default
                          // 1e-6 / max(1, Lambda*|mu|).  May be raised so the
                          // central scheme stays oscillation-free (see below).
};

struct ValidationReport {
  bool monotone = false;
  bool concave = false;
  bool bounds_ok = false;
  double residual_sup = 0.0;
  bool ok(double residual_gate) const {
    return monotone && concave && bounds_ok && residual_sup <= residual_gate;
  }
};

// Grid representation of g and g' on x = Phi/S.  x_grid[0] = 0 exactly; the
// remaining points are log-spaced on [x_series_cutoff, x_max].  Queries below
// the cutoff use the boundary-layer series, beyond it monotone cubic
// interpolation in u = ln x.
class ValueFunction {
 public:
  MarketParams params;
  std::vector<double> x_grid;   // {0} + log-spaced
  std::vector<double> g;
  std::vector<double> g_prime;
  double x_series_cutoff = 0.0;
  double residual_sup = 0.0;
  double solver_tol = 0.0;

  // Derived interpolation state; rebuilt by finalize().
  void finalize() {
    series_ = SeriesCoeffs(params);
    const std::size_t n = x_grid.size();
    if (n < 8 || x_grid[0] != 0.0)
      throw ConfigurationError("ValueFunction: malformed grid");
    u0_ = std::log(x_grid[1]);
    du_ = (std::log(x_grid[n - 1]) - u0_) / static_cast<double>(n - 2);
    slope_p_ = pchip_slopes(g_prime);
    slope_g_ = pchip_slopes(g);
  }

  double g_prime_at(double x) const {
    if (!(x >= 0.0)) throw std::invalid_argument("g_prime_at: x >= 0");
    if (x <= x_series_cutoff)
      return std::clamp(x == 0.0 ? 1.0 : series_.g_prime(x), 0.0, 1.0);
    if (x >= x_grid.back()) return std::clamp(g_prime.back(), 0.0, 1.0);
    return std::clamp(interp(x, g_prime, slope_p_), 0.0, 1.0);
  }

  double g_at(double x) const {
    if (!(x >= 0.0)) throw std::invalid_argument("g_at: x >= 0");
    if (x <= x_series_cutoff) return x == 0.0 ? 0.0 : series_.g(x);
    if (x >= x_grid.back())
      return g.back() + g_prime.back() * (x - x_grid.back());
    return interp(x, g, slope_g_);
  }

  // Full value via the scale reduction G(phi0, s0) = s0^2 g(phi0/s0).
  double value_of(double phi0, double s0) const {
    return s0 * s0 * g_at(phi0 / s0);
  }

  const SeriesCoeffs& series() const { return series_; }

 private:
  // Fritsch-Carlson monotone cubic slopes on the u = ln x grid (uniform
  // spacing du_ for indices >= 1).
  std::vector<double> pchip_slopes(const std::vector<double>& y) const {
    const std::size_t n = x_grid.size() - 1;  // log part has n points
    std::vector<double> d(n), m(n, 0.0);
    for (std::size_t i = 0; i + 1 < n; ++i) d[i] = (y[i + 2] - y[i + 1]) / du_;
    d[n - 1] = d[n - 2];
    m[0] = d[0];
    m[n - 1] = d[n - 2];
    for (std::size_t i = 1; i + 1 < n; ++i) {
      if (d[i - 1] * d[i] <= 0.0)
        m[i] = 0.0;
      else
        m[i] = 2.0 * d[i - 1] * d[i] / (d[i - 1] + d[i]);  // harmonic mean
    }
    return m;
  }

  double interp(double x, const std::vector<double>& y,
                const std::vector<double>& m) const {
    const double u = std::log(x);
    const std::size_t n = x_grid.size() - 1;
    std::size_t i = static_cast<std::size_t>(
        std::clamp((u - u0_) / du_, 0.0, static_cast<double>(n - 2)));
    const double t = (u - (u0_ + du_ * i)) / du_;
    const double y0 = y[i + 1], y1 = y[i + 2];
    const double m0 = m[i] * du_, m1 = m[i + 1] * du_;
    const double t2 = t * t, t3 = t2 * t;
    return (2 * t3 - 3 * t2 + 1) * y0 + (t3 - 2 * t2 + t) * m0 +
           (-2 * t3 + 3 * t2) * y1 + (t3 - t2) * m1;
  }

  SeriesCoeffs series_{MarketParams{}};
  double u0_ = 0.0, du_ = 1.0;
  std::vector<double> slope_p_, slope_g_;
};

namespace detail {

// Damped-Newton solve of the finite-difference system for g on the uniform
// u = ln x grid u_k = u0 + k h, k = 0..n-1.  The equation in u reads
//   A g_uu - B g_u + delta g + (1 - e^{-u} g_u)^2 / (2 Lambda) = 0,
//   A = sigma^2/2,  B = 3 sigma^2/2 + mu,  delta = 2 mu + sigma^2,
// closed by g(u_0) = g_left (boundary-layer series) and a far-field slope
// condition g_u = bc_a g + bc_b at u_{n-1} (second-order one-sided stencil).
// The Jacobian is tridiagonal apart from the last row, whose u_{n-3} entry is
// folded away during the Thomas forward pass.  Direct shooting is hopeless
// here: the transverse mode grows like x^{-2mu/sigma^2 - 1} toward 0 and like
// exp(c/sqrt(x)) away from it, so only a global solve is stable.
inline void newton_bvp(const MarketParams& mp, double u0, double h, int n,
                       double g_left, double bc_a, double bc_b,
                       std::vector<double>& g) {
  const double s2 = mp.sigma * mp.sigma;
  const double A = 0.5 * s2;
  const double B = 1.5 * s2 + mp.mu;
  const double delta = 2.0 * mp.mu + s2;
  const double inv2lam = 0.5 / mp.lambda_impact;
  const double ih2 = 1.0 / (h * h), i2h = 0.5 / h;

  std::vector<double> xinv(n);
  for (int k = 0; k < n; ++k) xinv[k] = std::exp(-(u0 + h * k));

  auto eval_f = [&](const std::vector<double>& y, std::vector<double>& f) {
    f[0] = y[0] - g_left;
    for (int k = 1; k + 1 < n; ++k) {
      const double gu = (y[k + 1] - y[k - 1]) * i2h;
      const double guu = (y[k + 1] - 2.0 * y[k] + y[k - 1]) * ih2;
      const double w = 1.0 - xinv[k] * gu;
      f[k] = A * guu - B * gu + delta * y[k] + inv2lam * w * w;
    }
    const double gu_end =
        (3.0 * y[n - 1] - 4.0 * y[n - 2] + y[n - 3]) * i2h;
    f[n - 1] = gu_end - (bc_a * y[n - 1] + bc_b);
  };

  std::vector<double> f(n), fn(n), lower(n), diag(n), upper(n), rhs(n),
      step(n), trial(n);
  auto norm_inf = [n](const std::vector<double>& v) {
    double m = 0.0;
    for (int k = 0; k < n; ++k) m = std::max(m, std::abs(v[k]));
    return m;
  };

  eval_f(g, f);
  double fnorm = norm_inf(f);
  for (int it = 0; it < 100; ++it) {
    // assemble J and solve J step = -f (Thomas; last row patched)
    diag[0] = 1.0;
    upper[0] = 0.0;
    rhs[0] = -f[0];
    for (int k = 1; k + 1 < n; ++k) {
      const double gu = (g[k + 1] - g[k - 1]) * i2h;
      const double w = 1.0 - xinv[k] * gu;
      const double dw = -2.0 * inv2lam * w * xinv[k] * i2h;  // d(w^2/2L)/dy±
      lower[k] = A * ih2 + B * i2h - dw;
      diag[k] = -2.0 * A * ih2 + delta;
      upper[k] = A * ih2 - B * i2h + dw;
      rhs[k] = -f[k];
    }
    // forward elimination over rows 0..n-2
    for (int k = 1; k + 1 < n; ++k) {
      const double m = lower[k] / diag[k - 1];
      diag[k] -= m * upper[k - 1];
      rhs[k] -= m * rhs[k - 1];
    }
    // last row: e*y[n-3] + a*y[n-2] + b*y[n-1] = rhs; fold e via row n-3
    {
      double e = i2h, a = -4.0 * i2h, b = 3.0 * i2h - bc_a,
             r = -f[n - 1];
      a -= e * upper[n - 3] / diag[n - 3];
      r -= e * rhs[n - 3] / diag[n - 3];
      const double m = a / diag[n - 2];
      const double dd = b - m * upper[n - 2];
      step[n - 1] = (r - m * rhs[n - 2]) / dd;
    }
    for (int k = n - 2; k >= 0; --k)
      step[k] = (rhs[k] - upper[k] * step[k + 1]) / diag[k];

    const double snorm = norm_inf(step);
    double t = 1.0;
    double trial_norm = fnorm;
    for (int ls = 0; ls < 40; ++ls) {
      for (int k = 0; k < n; ++k) trial[k] = g[k] + t * step[k];
      eval_f(trial, fn);
      trial_norm = norm_inf(fn);
      if (std::isfinite(trial_norm) && trial_norm < fnorm) break;
      t *= 0.5;
    }
    if (!(trial_norm < fnorm)) break;  // stagnated at the roundoff floor
    g.swap(trial);
    f.swap(fn);
    fnorm = trial_norm;
    if (t == 1.0 && snorm < 1e-13 * (1.0 + norm_inf(g))) break;
  }
  if (!(fnorm < 1e-6 * (1.0 + A * ih2)))
    throw NumericalBlowupError("integrate_value_ode: Newton did not converge");
}

}  // namespace detail

// Solves the stationary value ODE on [x0, x_max] as a two-point boundary
// value problem on the log grid and serves the result.  The far boundary
// closes the system with the regime's tail behaviour; both indicial
// exponents of the linearised far field are explicit, x^{delta/sigma^2} and
// x^2 with delta = 2mu + sigma^2:
//   - critical (delta = 0): Neumann, g'(x) = q/2 - q^2/3 + 11 q^3/48 with
//     q = 1/(Lambda sigma^2 x);
//   - subcritical (delta < 0): g -> g_inf = -1/(2 Lambda delta) with tail
//     g_inf - A x^{-gamma}, gamma = -delta/sigma^2, giving the Robin
//     condition x g' = gamma (g_inf - g);
//   - supercritical (delta > 0, mu < 0): g ~ C x^m + D, m = delta/sigma^2,
//     D = -1/(2 Lambda delta), giving x g' = m (g - D).
// Two nested grids are solved and Richardson-extrapolated to O(h^4).
inline ValueFunction integrate_value_ode(const MarketParams& mp,
                                         SolveOptions opt = {}) {
  mp.validate();
  if (!(mp.mu < 0.0))
    throw RegimeError(
        "value is infinite for positive drift and Phi0*S0 for zero drift; "
        "the stationary ODE requires mu < 0");

  double x0 = opt.x0;
  if (x0 <= 0.0)
    x0 = 1e-6 / std::max(1.0, mp.lambda_impact * std::abs(mp.mu));
  if (!(opt.x_max > x0))
    throw std::invalid_argument("integrate_value_ode: x_max must exceed x0");

  const SeriesCoeffs series(mp);
  {
    // Near x = 0 the linearised advection speed is a/(Lambda sqrt(x)), so the
    // cell Peclet number of the central scheme on the log grid is
    // 2 a du / (Lambda sigma^2 sqrt(x)).  Grid points below the x where that
    // reaches 1 would ring; raise the series handover above it instead (the
    // series is far more accurate there than any difference scheme).
    const double s2l = mp.sigma * mp.sigma * mp.lambda_impact;
    const double x_req = x0;
    for (int pass = 0; pass < 12; ++pass) {
      const double du_est = std::log(opt.x_max / x0) / (opt.n_grid - 1);
      x0 = std::max(x_req, std::pow(2.0 * series.a * du_est / s2l, 2));
    }
    if (series.next_term_ratio(x0) > 0.01)
      throw CutoffTooLargeError(
          "integrate_value_ode: stable grid start lies outside series "
          "validity; increase n_grid");
  }

  ValueFunction vf;
  vf.params = mp;
  vf.x_series_cutoff = x0;
  vf.solver_tol = opt.tol;
  const int n = opt.n_grid;
  if (n < 16) throw std::invalid_argument("integrate_value_ode: n_grid >= 16");
  vf.x_grid.resize(n + 1);
  vf.g.resize(n + 1);
  vf.g_prime.resize(n + 1);
  vf.x_grid[0] = 0.0;
  vf.g[0] = 0.0;
  vf.g_prime[0] = 1.0;

  const double u0 = std::log(x0), u1 = std::log(opt.x_max);
  const double du = (u1 - u0) / (n - 1);
  for (int k = 0; k < n; ++k) vf.x_grid[k + 1] = std::exp(u0 + du * k);
  vf.x_grid[n] = opt.x_max;

  const double g0_target = series.g(x0);
  const double s2 = mp.sigma * mp.sigma;
  const double delta = 2.0 * mp.mu + s2;
  const double lam = mp.lambda_impact;
  const double xm = opt.x_max;

  // far-boundary slope condition x g' = bc_a g + bc_b (in u: g_u)
  double bc_a, bc_b;
  if (std::abs(delta) <= 1e-12) {
    const double q = 1.0 / (lam * s2 * xm);
    bc_a = 0.0;
    bc_b = xm * (0.5 * q - q * q / 3.0 + (11.0 / 48.0) * q * q * q);
  } else if (delta < 0.0) {
    const double g_inf = -1.0 / (2.0 * lam * delta);
    const double gamma = -delta / s2;
    bc_a = -gamma;
    bc_b = gamma * g_inf;
  } else {
    const double d0 = -1.0 / (2.0 * lam * delta);
    const double m = delta / s2;
    bc_a = m;
    bc_b = -m * d0;
  }

  // The Dirichlet row excites a one-cell discrete boundary layer (the
  // advection coefficient e^{-u} makes the cell Peclet number O(1) there),
  // which is harmless in g but ruins finite differences of it.  Solve on a
  // grid extended a few cells below x0 and discard the extension.
  const int kx = 32;
  const double u_start = u0 - kx * du;
  const double g_left = series.g(std::exp(u_start));

  // initial iterate: a crude concave profile with the right endpoints
  auto initial_guess = [&](int nn, double hh, std::vector<double>& y) {
    y.resize(nn);
    if (delta < -1e-12) {
      const double g_inf = -1.0 / (2.0 * lam * delta);
      for (int k = 0; k < nn; ++k) {
        const double x = std::exp(u_start + hh * k);
        y[k] = g_inf * -std::expm1(-x / g_inf);
      }
    } else {
      // integrate dg/du = x p_guess with p_guess ~ 1 near 0 and ~ q/2 far out
      const double a = series.a;
      double xp = std::exp(u_start);
      double pp = 1.0 / (1.0 + a * std::sqrt(xp) + 2.0 * lam * s2 * xp);
      y[0] = g_left;
      for (int k = 1; k < nn; ++k) {
        const double x = std::exp(u_start + hh * k);
        const double p = 1.0 / (1.0 + a * std::sqrt(x) + 2.0 * lam * s2 * x);
        y[k] = y[k - 1] + 0.5 * hh * (xp * pp + x * p);
        xp = x;
        pp = p;
      }
    }
    y[0] = g_left;
  };

  // coarse solve on the extended grid, fine solve at half spacing, Richardson
  const int nc = n + kx;
  std::vector<double> gc, gf;
  initial_guess(nc, du, gc);
  detail::newton_bvp(mp, u_start, du, nc, g_left, bc_a, bc_b, gc);
  // the fine iterate starts from the analytic guess as well: linear
  // interpolation of the coarse solution has sawtooth curvature, which the
  // strongly nonlinear rows near x0 cannot recover from
  const int nf = 2 * nc - 1;
  initial_guess(nf, 0.5 * du, gf);
  detail::newton_bvp(mp, u_start, 0.5 * du, nf, g_left, bc_a, bc_b, gf);
  for (int k = 0; k < n; ++k)
    vf.g[k + 1] = (4.0 * gf[2 * (k + kx)] - gc[k + kx]) / 3.0;

  // g' = e^{-u} g_u via 4th-order differences of the extrapolated g
  {
    auto gk = [&](int k) { return vf.g[k + 1]; };  // 0-based on the log part
    const double c = 1.0 / (12.0 * du);
    for (int k = 0; k < n; ++k) {
      double gu;
      if (k == 0)
        gu = (-25.0 * gk(0) + 48.0 * gk(1) - 36.0 * gk(2) + 16.0 * gk(3) -
              3.0 * gk(4)) * c;
      else if (k == 1)
        gu = (-3.0 * gk(0) - 10.0 * gk(1) + 18.0 * gk(2) - 6.0 * gk(3) +
              gk(4)) * c;
      else if (k == n - 2)
        gu = (3.0 * gk(n - 1) + 10.0 * gk(n - 2) - 18.0 * gk(n - 3) +
              6.0 * gk(n - 4) - gk(n - 5)) * c;
      else if (k == n - 1)
        gu = (25.0 * gk(n - 1) - 48.0 * gk(n - 2) + 36.0 * gk(n - 3) -
              16.0 * gk(n - 4) + 3.0 * gk(n - 5)) * c;
      else
        gu = (-gk(k + 2) + 8.0 * gk(k + 1) - 8.0 * gk(k - 1) + gk(k - 2)) * c;
      vf.g_prime[k + 1] = gu / vf.x_grid[k + 1];
    }
  }

  // the solved g' must land on the series branch at the cutoff
  if (std::abs(vf.g_prime[1] - series.g_prime(x0)) > 1e-6) {
    char msg[160];
    std::snprintf(msg, sizeof msg,
                  "integrate_value_ode: solution missed the series branch at "
                  "x0=%g (g'=%.12g, series %.12g)",
                  x0, vf.g_prime[1], series.g_prime(x0));
    throw MonotonicityError(msg);
  }
  for (int k = 1; k <= n; ++k)
    vf.g_prime[k] = std::clamp(vf.g_prime[k], 0.0, 1.0);

  // Scaled residual of the ODE on interior log-grid points, with g''
  // reconstructed by 4th-order central differences of g' in u = ln x.
  double rsup = 0.0;
  for (int k = 3; k + 2 <= n; ++k) {
    const double xi = vf.x_grid[k];
    const double dpdu = (-vf.g_prime[k + 2] + 8.0 * vf.g_prime[k + 1] -
                         8.0 * vf.g_prime[k - 1] + vf.g_prime[k - 2]) /
                        (12.0 * du);
    const double gpp = dpdu / xi;
    const double t1 = 0.5 * s2 * xi * xi * gpp;
    const double t2 = -(mp.mu + s2) * xi * vf.g_prime[k];
    const double t3 = (2.0 * mp.mu + s2) * vf.g[k];
    const double one_m_p = 1.0 - vf.g_prime[k];
    const double t4 = one_m_p * one_m_p / (2.0 * mp.lambda_impact);
    const double denom =
        1.0 + std::abs(t1) + std::abs(t2) + std::abs(t3) + std::abs(t4);
    rsup = std::max(rsup, std::abs(t1 + t2 + t3 + t4) / denom);
  }
  vf.residual_sup = rsup;

  vf.finalize();
  return vf;
}

inline double g_prime_at(const ValueFunction& vf, double x) {
  return vf.g_prime_at(x);
}

inline ValidationReport validate(const ValueFunction& vf,
                                 double tol_concavity = 1e-9) {
  ValidationReport r;
  r.residual_sup = vf.residual_sup;
  r.monotone = true;
  r.concave = true;
  r.bounds_ok = vf.g[0] == 0.0 && vf.g_prime[0] == 1.0;
  const std::size_t n = vf.x_grid.size();
  for (std::size_t k = 0; k + 1 < n; ++k) {
    if (vf.g[k + 1] < vf.g[k]) r.monotone = false;
    if (vf.g_prime[k + 1] > vf.g_prime[k] + tol_concavity) r.concave = false;
  }
  for (std::size_t k = 0; k < n; ++k) {
    if (vf.g[k] < 0.0 || vf.g[k] > vf.x_grid[k] * (1.0 + 1e-12) + 1e-300 ||
        vf.g_prime[k] < 0.0 || vf.g_prime[k] > 1.0)
      r.bounds_ok = false;
  }
  // Discrete concavity of g via second differences on the log grid.
  for (std::size_t k = 1; k + 2 < n; ++k) {
    const double h1 = vf.x_grid[k + 1] - vf.x_grid[k];
    const double h2 = vf.x_grid[k + 2] - vf.x_grid[k + 1];
    const double d1 = (vf.g[k + 1] - vf.g[k]) / h1;
    const double d2 = (vf.g[k + 2] - vf.g[k + 1]) / h2;
    if (d2 > d1 + tol_concavity) r.concave = false;
  }
  return r;
}

inline nlohmann::json to_json(const ValueFunction& vf) {
  nlohmann::json j;
  j["params"] = {{"mu", vf.params.mu},
                 {"sigma", vf.params.sigma},
                 {"lambda_impact", vf.params.lambda_impact},
                 {"s0", vf.params.s0},
                 {"phi0", vf.params.phi0}};
  j["x_series_cutoff"] = vf.x_series_cutoff;
  j["x"] = vf.x_grid;
  j["g"] = vf.g;
  j["g_prime"] = vf.g_prime;
  j["residual_sup"] = vf.residual_sup;
  j["solver_meta"] = {{"tol", vf.solver_tol}};
  return j;
}

inline ValueFunction value_function_from_json(const nlohmann::json& j) {
  ValueFunction vf;
  const auto& p = j.at("params");
  vf.params = MarketParams{p.at("mu"), p.at("sigma"), p.at("lambda_impact"),
                           p.at("s0"), p.at("phi0")};
  vf.x_series_cutoff = j.at("x_series_cutoff");
  vf.x_grid = j.at("x").get<std::vector<double>>();
  vf.g = j.at("g").get<std::vector<double>>();
  vf.g_prime = j.at("g_prime").get<std::vector<double>>();
  vf.residual_sup = j.at("residual_sup");
  vf.solver_tol = j.at("solver_meta").at("tol");
  vf.finalize();
  return vf;
}

inline void write_csv(const ValueFunction& vf, std::ostream& os) {
  os << "x,g,g_prime\n";
  char buf[96];
  for (std::size_t k = 0; k < vf.x_grid.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", vf.x_grid[k], vf.g[k],
                  vf.g_prime[k]);
    os << buf;
  }
}

}  // namespace optexec
