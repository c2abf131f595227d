#pragma once

#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "optexec/closed_form.hpp"
#include "optexec/errors.hpp"
#include "optexec/market_model.hpp"
#include "optexec/value_ode.hpp"

namespace optexec {

// An admissible trading policy: a selling rate phi(t, s, phi_inventory) <= 0.
// The engine enforces phi >= 0 via absorption; a positive emitted rate is an
// admissibility violation.
struct Policy {
  std::string name;
  std::function<double(double t, double s, double phi)> rate;
};

inline Policy optimal_feedback(const ValueFunction& vf) {
  const double lam = vf.params.lambda_impact;
  return Policy{"optimal_feedback", [&vf, lam](double, double s, double phi) {
                  return phi <= 0.0
                             ? 0.0
                             : -(s / lam) * (1.0 - vf.g_prime_at(phi / s));
                }};
}

inline Policy optimal_feedback_checked(const ValueFunction& vf,
                                       const MarketParams& p) {
  if (vf.params.mu != p.mu || vf.params.sigma != p.sigma ||
      vf.params.lambda_impact != p.lambda_impact)
    throw ConfigurationError(
        "optimal_feedback: value function solved for different parameters");
  return optimal_feedback(vf);
}

inline Policy optimal_feedback_critical(const CriticalParams& p) {
  return Policy{"optimal_feedback_critical",
                [p](double, double s, double phi) {
                  return optimal_rate_critical(s, phi, p);
                }};
}

// phi_t = -c * phi0 * exp(-c t); with c = 1/n this is the near-martingale
// family phi^n from the zero-drift discussion.
inline Policy exponential_rate(double c, double phi0) {
  if (!(c > 0.0)) throw std::invalid_argument("exponential_rate: c > 0");
  char nm[48];
  std::snprintf(nm, sizeof nm, "exponential_rate_c=%g", c);
  return Policy{nm, [c, phi0](double t, double, double) {
                  return -c * phi0 * std::exp(-c * t);
                }};
}

// Sell at constant rate phi0/T until the horizon (fire sale as T -> 0).
inline Policy constant_rate(double horizon, double phi0) {
  if (!(horizon > 0.0)) throw std::invalid_argument("constant_rate: T > 0");
  char nm[48];
  std::snprintf(nm, sizeof nm, "constant_rate_T=%g", horizon);
  const double r = -phi0 / horizon;
  return Policy{nm, [r, horizon](double t, double, double) {
                  return t < horizon ? r : 0.0;
                }};
}

inline Policy custom_policy(std::string name,
                            std::function<double(double, double, double)> fn) {
  return Policy{std::move(name), std::move(fn)};
}

struct ExecutionResult {
  std::vector<double> times;
  std::vector<double> inventory;       // Phi at grid nodes, nonincreasing
  std::vector<double> rate;            // policy rate at grid nodes, <= 0
  std::vector<double> revenue_cum;     // -int phi S dt, running
  std::vector<double> impact_cost_cum; // (Lambda/2) int phi^2 dt, running
  double v_realized = 0.0;
  double hit_time = std::numeric_limits<double>::infinity();
};

// Advances the inventory ODE along one price path.  The rate decision holds S
// at its interval-start value (non-anticipative); revenue accrues against the
// bridge-conditional mean price inside the interval, capped at the interval
// endpoints' max so the pathwise bound revenue <= Phi0 * max S is kept.
inline ExecutionResult simulate_execution(const Policy& policy,
                                          const PricePath& path, double phi0,
                                          int substeps,
                                          const MarketParams& params) {
  if (substeps < 1) throw std::invalid_argument("substeps >= 1");
  if (!(phi0 >= 0.0)) throw std::invalid_argument("phi0 >= 0");
  const std::size_t n = path.times.size();
  if (n < 2 || path.prices.size() != n)
    throw std::invalid_argument("simulate_execution: malformed path");

  const double lam = params.lambda_impact;
  const double s2 = params.sigma * params.sigma;

  ExecutionResult res;
  res.times = path.times;
  res.inventory.resize(n);
  res.rate.resize(n);
  res.revenue_cum.resize(n);
  res.impact_cost_cum.resize(n);

  double phi = phi0;
  double revenue = 0.0, impact = 0.0;
  bool absorbed = (phi == 0.0);
  if (absorbed) res.hit_time = 0.0;

  auto emit_rate = [&](double t, double s, double inv) {
    double r = policy.rate(t, s, inv);
    if (r > 1e-12)
      throw AdmissibilityError("policy emitted a positive (buying) rate");
    return std::min(r, 0.0);
  };

  res.inventory[0] = phi;
  res.rate[0] = absorbed ? 0.0 : emit_rate(path.times[0], path.prices[0], phi);
  res.revenue_cum[0] = 0.0;
  res.impact_cost_cum[0] = 0.0;

  for (std::size_t k = 0; k + 1 < n; ++k) {
    const double t0 = path.times[k];
    const double dt = path.times[k + 1] - t0;
    const double sa = path.prices[k], sb = path.prices[k + 1];
    const double lr = std::log(sb / sa);
    const double smax = std::max(sa, sb);
    const double h = dt / substeps;
    for (int j = 0; j < substeps && !absorbed; ++j) {
      const double u_mid = (j + 0.5) * h;
      const double r = emit_rate(t0 + u_mid, sa, phi);
      if (r == 0.0) continue;
      double step = h;
      double t_local = u_mid;
      if (phi + r * h <= 0.0) {
        step = phi / (-r);
        t_local = j * h + 0.5 * step;
        absorbed = true;
        res.hit_time = t0 + j * h + step;
      }
      const double s_mid = std::min(
          sa * std::exp(lr * t_local / dt +
                        0.5 * s2 * t_local * (dt - t_local) / dt),
          smax);
      revenue += -r * s_mid * step;
      impact += 0.5 * lam * r * r * step;
      phi = absorbed ? 0.0 : phi + r * h;
    }
    res.inventory[k + 1] = phi;
    res.rate[k + 1] =
        absorbed ? 0.0 : emit_rate(path.times[k + 1], path.prices[k + 1], phi);
    res.revenue_cum[k + 1] = revenue;
    res.impact_cost_cum[k + 1] = impact;
  }
  res.v_realized = revenue - impact;
  return res;
}

struct MPath {
  std::vector<double> times;
  std::vector<double> m;  // S_t g'(Phi_t / S_t), nonnegative
};

// Shadow execution price along the optimum; a nonnegative supermartingale.
inline MPath supermartingale_diagnostic(const ExecutionResult& result,
                                        const PricePath& path,
                                        const ValueFunction& vf) {
  MPath mp;
  mp.times = result.times;
  mp.m.resize(result.times.size());
  for (std::size_t k = 0; k < mp.m.size(); ++k)
    mp.m[k] =
        path.prices[k] * vf.g_prime_at(result.inventory[k] / path.prices[k]);
  return mp;
}

inline void write_csv(const ExecutionResult& r, const PricePath& path,
                      std::ostream& os, const MPath* mpath = nullptr) {
  os << "t,S,phi_rate,inventory,revenue_cum,impact_cost_cum,M\n";
  char buf[192];
  for (std::size_t k = 0; k < r.times.size(); ++k) {
    const double m = mpath ? mpath->m[k] : std::nan("");
    std::snprintf(buf, sizeof buf,
                  "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.times[k],
                  path.prices[k], r.rate[k], r.inventory[k], r.revenue_cum[k],
                  r.impact_cost_cum[k], m);
    os << buf;
  }
}

}  // namespace optexec
