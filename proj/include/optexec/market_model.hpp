#pragma once

#include <cmath>
#include <cstdint>
#include <ostream>
#include <span>
#include <stdexcept>
#include <vector>

#include "optexec/rng.hpp"

namespace optexec {

enum class DriftRegime { NegativeDrift, Martingale, PositiveDrift };

struct Regime {
  DriftRegime drift;
  bool critical;  // |2*mu + sigma^2| <= tol_critical
};

// Model constants: dS/S has drift mu and volatility sigma, execution price is
// S + (Lambda/2)*rate, initial state (s0, phi0).
struct MarketParams {
  double mu = -0.125;
  double sigma = 0.5;
  double lambda_impact = 1.0;
  double s0 = 1.0;
  double phi0 = 1.0;

  void validate() const {
    if (!(sigma > 0.0)) throw std::invalid_argument("sigma must be > 0");
    if (!(lambda_impact > 0.0))
      throw std::invalid_argument("lambda_impact must be > 0");
    if (!(s0 > 0.0)) throw std::invalid_argument("s0 must be > 0");
    if (!(phi0 >= 0.0)) throw std::invalid_argument("phi0 must be >= 0");
    if (!std::isfinite(mu)) throw std::invalid_argument("mu must be finite");
  }
};

inline Regime classify_regime(const MarketParams& p, double tol_zero = 1e-12,
                              double tol_critical = 1e-12) {
  p.validate();
  Regime r;
  if (p.mu < -tol_zero)
    r.drift = DriftRegime::NegativeDrift;
  else if (p.mu <= tol_zero)
    r.drift = DriftRegime::Martingale;
  else
    r.drift = DriftRegime::PositiveDrift;
  r.critical = std::abs(2.0 * p.mu + p.sigma * p.sigma) <= tol_critical;
  return r;
}

struct PricePath {
  std::vector<double> times;
  std::vector<double> prices;
};

inline std::vector<double> uniform_grid(double horizon, int n_steps) {
  if (!(horizon > 0.0) || n_steps < 1)
    throw std::invalid_argument("uniform_grid: horizon > 0, n_steps >= 1");
  std::vector<double> t(n_steps + 1);
  for (int k = 0; k <= n_steps; ++k)
    t[k] = horizon * static_cast<double>(k) / n_steps;
  return t;
}

// Exact lognormal stepping: no discretization bias in the price itself.
// With antithetic=true every normal draw is negated (same stream).
inline PricePath simulate_gbm(const MarketParams& p,
                              std::span<const double> time_grid,
                              std::uint64_t seed, std::uint64_t stream,
                              bool antithetic = false) {
  p.validate();
  if (time_grid.size() < 2 || time_grid[0] != 0.0)
    throw std::invalid_argument("time_grid must start at 0 with >= 2 points");
  for (std::size_t k = 1; k < time_grid.size(); ++k)
    if (!(time_grid[k] > time_grid[k - 1]))
      throw std::invalid_argument("time_grid must be strictly increasing");

  CounterRng rng(seed, stream);
  const double sign = antithetic ? -1.0 : 1.0;
  PricePath path;
  path.times.assign(time_grid.begin(), time_grid.end());
  path.prices.resize(time_grid.size());
  path.prices[0] = p.s0;
  double s = p.s0;
  for (std::size_t k = 1; k < time_grid.size(); ++k) {
    const double dt = time_grid[k] - time_grid[k - 1];
    const double z = sign * rng.normal();
    s *= std::exp(p.sigma * std::sqrt(dt) * z +
                  (p.mu - 0.5 * p.sigma * p.sigma) * dt);
    path.prices[k] = s;
  }
  return path;
}

inline void write_csv(const PricePath& path, std::ostream& os) {
  os << "t,S\n";
  char buf[64];
  for (std::size_t k = 0; k < path.times.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", path.times[k],
                  path.prices[k]);
    os << buf;
  }
}

}  // namespace optexec
