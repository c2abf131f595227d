#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <vector>

#include "json.hpp"
#include "optexec/errors.hpp"
#include "optexec/market_model.hpp"
#include "optexec/value_ode.hpp"

namespace optexec {

// Finite-horizon reduced HJB marched backward from u(T,.) = 0:
//   u_t + (sigma^2 x^2/2) u_xx - (mu+sigma^2) x u_x + (2mu+sigma^2) u
//       + (max(0, 1-u_x))^2 / (2 Lambda) = 0.
// Independent of the stationary ODE solver; u(0,.) -> g as T grows.  The far
// boundary is closed with the stationary tail's slope relation
// x u_x = bc_a u + bc_b (a zero-curvature closure instead pollutes the
// interior by O(1/x_max), far too slowly to truncate at a usable x_max).
struct HJBGrid {
  std::vector<double> x;                    // uniform on [0, x_max]
  std::vector<double> snap_t;               // snapshot times, increasing
  std::vector<std::vector<double>> u_snap;  // u at snapshot times
  double horizon = 0.0;
  double dt = 0.0;
  double cfl_ratio = 0.0;
  long nt = 0;
  int nx = 0;

  const std::vector<double>& u0() const { return u_snap.front(); }

  double u_at(double t, double xq) const {
    // nearest snapshot in t, linear in x
    std::size_t s = 0;
    for (std::size_t k = 1; k < snap_t.size(); ++k)
      if (std::abs(snap_t[k] - t) < std::abs(snap_t[s] - t)) s = k;
    return interp_x(u_snap[s], xq);
  }

  double interp_x(const std::vector<double>& u, double xq) const {
    const double dx = x[1] - x[0];
    if (xq <= 0.0) return 0.0;
    if (xq >= x.back()) return u.back();
    const std::size_t i = static_cast<std::size_t>(xq / dx);
    const double w = (xq - x[i]) / dx;
    return (1.0 - w) * u[i] + w * u[i + 1];
  }
};

// Smallest stable step count for the explicit march.
inline long required_nt(const MarketParams& p, double horizon, double x_max,
                        int nx, double cfl = 0.9) {
  const double dx = x_max / nx;
  const double s2 = p.sigma * p.sigma;
  const double c = std::abs(2.0 * p.mu + s2);
  double max_rate = 0.0;
  for (int i = 1; i <= nx; ++i) {
    const double x = dx * i;
    const double rate = s2 * x * x / (dx * dx) +
                        std::abs((p.mu + s2) * x) / dx + c;
    max_rate = std::max(max_rate, rate);
  }
  return static_cast<long>(std::ceil(horizon * max_rate / cfl)) + 1;
}

inline HJBGrid march_hjb(const MarketParams& p, double horizon, double x_max,
                         int nx, long nt, int n_snapshots = 201) {
  p.validate();
  if (!(p.mu < 0.0)) throw RegimeError("march_hjb requires mu < 0");
  if (nx < 8 || nt < 1 || !(x_max > 0.0) || !(horizon > 0.0))
    throw std::invalid_argument("march_hjb: bad grid sizes");
  const long nt_min = required_nt(p, horizon, x_max, nx);
  if (nt < nt_min) {
    char msg[128];
    std::snprintf(msg, sizeof msg,
                  "march_hjb: CFL violated, need nt >= %ld (got %ld)", nt_min,
                  nt);
    throw CflError(msg, nt_min);
  }

  HJBGrid grid;
  grid.nx = nx;
  grid.nt = nt;
  grid.horizon = horizon;
  grid.dt = horizon / nt;
  grid.cfl_ratio = static_cast<double>(nt_min) / nt;
  const double dx = x_max / nx;
  grid.x.resize(nx + 1);
  for (int i = 0; i <= nx; ++i) grid.x[i] = dx * i;

  const double s2 = p.sigma * p.sigma;
  const double c = 2.0 * p.mu + s2;
  const double inv2lam = 1.0 / (2.0 * p.lambda_impact);
  const double inv_dx = 1.0 / dx, inv_dx2 = inv_dx * inv_dx;
  const bool adv_pos = (p.mu + s2) > 0.0;

  // far-boundary slope relation x u_x = bc_a u + bc_b from the tail of the
  // stationary limit (indicial exponents delta/sigma^2 and 2)
  double bc_a, bc_b;
  if (std::abs(c) <= 1e-12) {
    const double q = 1.0 / (p.lambda_impact * s2 * x_max);
    bc_a = 0.0;
    bc_b = x_max * (0.5 * q - q * q / 3.0 + (11.0 / 48.0) * q * q * q);
  } else if (c < 0.0) {
    const double g_inf = -1.0 / (2.0 * p.lambda_impact * c);
    const double gamma = -c / s2;
    bc_a = -gamma;
    bc_b = gamma * g_inf;
  } else {
    const double d0 = -1.0 / (2.0 * p.lambda_impact * c);
    const double m = c / s2;
    bc_a = m;
    bc_b = -m * d0;
  }

  std::vector<double> diff_c(nx + 1), adv_c(nx + 1);
  for (int i = 0; i <= nx; ++i) {
    diff_c[i] = 0.5 * s2 * grid.x[i] * grid.x[i] * inv_dx2;
    adv_c[i] = (p.mu + s2) * grid.x[i] * inv_dx;
  }

  std::vector<double> u(nx + 1, 0.0), un(nx + 1, 0.0);

  // snapshot schedule (in marched order T -> 0)
  const long stride = std::max<long>(1, nt / std::max(1, n_snapshots - 1));
  std::vector<std::pair<double, std::vector<double>>> snaps;
  snaps.emplace_back(horizon, u);

  const double dt = grid.dt;
  for (long m = nt; m >= 1; --m) {
    const double* up = u.data();
    double* np = un.data();
    for (int i = 1; i < nx; ++i) {
      const double lap = diff_c[i] * (up[i + 1] - 2.0 * up[i] + up[i - 1]);
      const double adv = adv_pos ? adv_c[i] * (up[i] - up[i - 1])
                                 : adv_c[i] * (up[i + 1] - up[i]);
      const double ux = 0.5 * inv_dx * (up[i + 1] - up[i - 1]);
      const double gp = std::max(0.0, 1.0 - ux);
      np[i] = up[i] + dt * (lap - adv + c * up[i] + gp * gp * inv2lam);
    }
    np[0] = 0.0;
    {
      // right boundary: second-order one-sided stencil for the slope relation
      const double w = 2.0 * dx / x_max;
      np[nx] = (4.0 * np[nx - 1] - np[nx - 2] + w * bc_b) / (3.0 - w * bc_a);
    }
    u.swap(un);
    const long done = nt - m + 1;
    if (done % stride == 0 || m == 1)
      snaps.emplace_back(dt * (m - 1), u);
  }

  std::sort(snaps.begin(), snaps.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  for (auto& s : snaps) {
    grid.snap_t.push_back(s.first);
    grid.u_snap.push_back(std::move(s.second));
  }

  // scheme sanity: u(0,.) must be monotone in x up to roundoff
  const auto& u0 = grid.u0();
  for (int i = 0; i + 1 <= nx; ++i)
    if (u0[i + 1] < u0[i] - 1e-9)
      throw MonotonicityError("march_hjb: scheme failure, u(0,.) not monotone");
  return grid;
}

// Feedback rate in the reduced coordinate: psi = -(1 - u_x)^+ / Lambda.
inline double policy_from_grid(const HJBGrid& grid, const MarketParams& p,
                               double t, double xq) {
  if (t < 0.0 || t > grid.horizon || xq < 0.0 || xq > grid.x.back())
    throw std::invalid_argument("policy_from_grid: (t,x) outside grid");
  std::size_t s = 0;
  for (std::size_t k = 1; k < grid.snap_t.size(); ++k)
    if (std::abs(grid.snap_t[k] - t) < std::abs(grid.snap_t[s] - t)) s = k;
  const auto& u = grid.u_snap[s];
  const double dx = grid.x[1] - grid.x[0];
  std::size_t i = std::min<std::size_t>(
      grid.x.size() - 2, static_cast<std::size_t>(xq / dx));
  if (i == 0) i = 1;
  const double ux = 0.5 * (u[i + 1] - u[i - 1]) / dx;
  return -std::max(0.0, 1.0 - ux) / p.lambda_impact;
}

// Max |u(0,x) - g(x)| over grid points in [x_lo, x_hi].
inline double max_deviation(const HJBGrid& grid, const ValueFunction& vf,
                            double x_lo, double x_hi) {
  double dev = 0.0;
  const auto& u0 = grid.u0();
  for (std::size_t i = 0; i < grid.x.size(); ++i) {
    if (grid.x[i] < x_lo || grid.x[i] > x_hi) continue;
    dev = std::max(dev, std::abs(u0[i] - vf.g_at(grid.x[i])));
  }
  return dev;
}

inline void write_csv(const HJBGrid& grid, std::ostream& os) {
  os << "t,x,u\n";
  char buf[96];
  for (std::size_t s = 0; s < grid.snap_t.size(); ++s)
    for (std::size_t i = 0; i < grid.x.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", grid.snap_t[s],
                    grid.x[i], grid.u_snap[s][i]);
      os << buf;
    }
}

}  // namespace optexec
