#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "optexec/market_model.hpp"
#include "optexec/strategy_engine.hpp"

namespace optexec {

struct MCOptions {
  std::int64_t n_paths = 100000;
  double horizon = 0.0;  // 0 -> pick from the tail rule where possible
  int n_steps = 512;
  int substeps = 8;
  std::uint64_t seed = 0x5eed0001ULL;
  bool antithetic = true;
};

struct MCEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  double ci95_lo = 0.0, ci95_hi = 0.0;
  std::int64_t n_paths = 0;
  double horizon = 0.0;
  double tail_bound = 0.0;  // Phi0 S0 e^{mu T} for mu < 0, else +inf
  std::uint64_t seed = 0;
  bool divergence_warning = false;  // positive drift: value is infinite
};

// Truncation-bias certificate E[-int_T^inf phi S dt] <= Phi0 S0 e^{mu T}.
inline double tail_bound(const MarketParams& p, double horizon) {
  if (p.mu < 0.0) return p.phi0 * p.s0 * std::exp(p.mu * horizon);
  return std::numeric_limits<double>::infinity();
}

// Smallest T with tail_bound <= frac * reference_value (mu < 0 only).
inline double horizon_for_tail(const MarketParams& p, double reference_value,
                               double frac = 1e-3) {
  if (!(p.mu < 0.0)) throw RegimeError("horizon_for_tail requires mu < 0");
  if (!(reference_value > 0.0) || p.phi0 == 0.0) return 1.0;
  return std::log(p.phi0 * p.s0 / (frac * reference_value)) / (-p.mu);
}

namespace detail {

inline void finish_stats(const std::vector<double>& samples, MCEstimate& est) {
  // Fixed summation order by sample index keeps results reproducible.
  const std::size_t n = samples.size();
  double sum = 0.0;
  for (double v : samples) sum += v;
  const double mean = sum / static_cast<double>(n);
  double ss = 0.0;
  for (double v : samples) ss += (v - mean) * (v - mean);
  est.mean = mean;
  est.std_error = n > 1 ? std::sqrt(ss / (static_cast<double>(n) *
                                          static_cast<double>(n - 1)))
                        : 0.0;
  est.ci95_lo = mean - 1.96 * est.std_error;
  est.ci95_hi = mean + 1.96 * est.std_error;
}

}  // namespace detail

// Mean profit of a policy over truncated-horizon paths.  With antithetic on,
// paths come in (Z, -Z) pairs and the standard error is computed over pair
// means.
inline MCEstimate estimate_value(const MarketParams& params,
                                 const Policy& policy, const MCOptions& opt) {
  params.validate();
  if (opt.n_paths < 2) throw std::invalid_argument("n_paths >= 2");
  if (!(opt.horizon > 0.0)) throw std::invalid_argument("horizon > 0");

  const auto grid = uniform_grid(opt.horizon, opt.n_steps);
  const std::int64_t n_units =
      opt.antithetic ? opt.n_paths / 2 : opt.n_paths;
  std::vector<double> samples(n_units);
  for (std::int64_t i = 0; i < n_units; ++i) {
    const auto path = simulate_gbm(params, grid, opt.seed, i, false);
    const auto r =
        simulate_execution(policy, path, params.phi0, opt.substeps, params);
    if (opt.antithetic) {
      const auto path2 = simulate_gbm(params, grid, opt.seed, i, true);
      const auto r2 =
          simulate_execution(policy, path2, params.phi0, opt.substeps, params);
      samples[i] = 0.5 * (r.v_realized + r2.v_realized);
    } else {
      samples[i] = r.v_realized;
    }
  }

  MCEstimate est;
  detail::finish_stats(samples, est);
  est.n_paths = opt.antithetic ? 2 * n_units : n_units;
  est.horizon = opt.horizon;
  est.tail_bound = tail_bound(params, opt.horizon);
  est.seed = opt.seed;
  est.divergence_warning =
      classify_regime(params).drift == DriftRegime::PositiveDrift;
  return est;
}

struct ComparisonRow {
  std::string policy;
  double mean = 0.0;
  double std_error = 0.0;
  double diff_vs_first = 0.0;     // mean - first (optimal) mean
  double diff_std_error = 0.0;    // SE of the paired difference
};

// Evaluates all policies on identical paths (common random numbers); the
// first policy is the reference the paired differences are taken against.
inline std::vector<ComparisonRow> compare_policies(
    const MarketParams& params, const std::vector<Policy>& policies,
    const MCOptions& opt) {
  if (policies.size() < 2)
    throw std::invalid_argument("compare_policies: need >= 2 policies");
  const auto grid = uniform_grid(opt.horizon, opt.n_steps);
  const std::int64_t n_units = opt.antithetic ? opt.n_paths / 2 : opt.n_paths;
  const std::size_t np = policies.size();
  std::vector<std::vector<double>> samples(np,
                                           std::vector<double>(n_units));
  for (std::int64_t i = 0; i < n_units; ++i) {
    const auto path = simulate_gbm(params, grid, opt.seed, i, false);
    PricePath path2;
    if (opt.antithetic) path2 = simulate_gbm(params, grid, opt.seed, i, true);
    for (std::size_t j = 0; j < np; ++j) {
      const auto r = simulate_execution(policies[j], path, params.phi0,
                                        opt.substeps, params);
      if (opt.antithetic) {
        const auto r2 = simulate_execution(policies[j], path2, params.phi0,
                                           opt.substeps, params);
        samples[j][i] = 0.5 * (r.v_realized + r2.v_realized);
      } else {
        samples[j][i] = r.v_realized;
      }
    }
  }

  std::vector<ComparisonRow> rows(np);
  for (std::size_t j = 0; j < np; ++j) {
    MCEstimate est;
    detail::finish_stats(samples[j], est);
    rows[j].policy = policies[j].name;
    rows[j].mean = est.mean;
    rows[j].std_error = est.std_error;
    if (j == 0) continue;
    std::vector<double> diff(n_units);
    for (std::int64_t i = 0; i < n_units; ++i)
      diff[i] = samples[j][i] - samples[0][i];
    MCEstimate dst;
    detail::finish_stats(diff, dst);
    rows[j].diff_vs_first = dst.mean;
    rows[j].diff_std_error = dst.std_error;
  }
  return rows;
}

// Cross-sectional statistics of the supermartingale M_t along optimal-policy
// paths, plus the Monte Carlo check of E[-int phi M dt] = Phi0 M0.
struct SupermartingaleStudy {
  std::vector<double> times;
  std::vector<double> m_mean;
  std::vector<double> m_se;
  std::vector<double> step_diff_mean;  // mean of M_{k+1} - M_k (paired)
  std::vector<double> step_diff_se;
  double integral_mean = 0.0;  // -int phi M dt
  double integral_se = 0.0;
  double m0 = 0.0;
};

inline SupermartingaleStudy supermartingale_mc(const MarketParams& params,
                                               const ValueFunction& vf,
                                               const MCOptions& opt) {
  const auto grid = uniform_grid(opt.horizon, opt.n_steps);
  const auto policy = optimal_feedback_checked(vf, params);
  const std::size_t nt = grid.size();
  const std::int64_t n = opt.n_paths;

  std::vector<double> sum(nt, 0.0), sumsq(nt, 0.0);
  std::vector<double> dsum(nt - 1, 0.0), dsumsq(nt - 1, 0.0);
  double isum = 0.0, isumsq = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    const auto path = simulate_gbm(params, grid, opt.seed, i, false);
    const auto res =
        simulate_execution(policy, path, params.phi0, opt.substeps, params);
    const auto mp = supermartingale_diagnostic(res, path, vf);
    double integral = 0.0;
    for (std::size_t k = 0; k < nt; ++k) {
      sum[k] += mp.m[k];
      sumsq[k] += mp.m[k] * mp.m[k];
      if (k + 1 < nt) {
        const double d = mp.m[k + 1] - mp.m[k];
        dsum[k] += d;
        dsumsq[k] += d * d;
        // trapezoid in -phi M over the grid
        const double dt = grid[k + 1] - grid[k];
        integral += 0.5 * dt *
                    (-res.rate[k] * mp.m[k] - res.rate[k + 1] * mp.m[k + 1]);
      }
    }
    isum += integral;
    isumsq += integral * integral;
  }

  auto mk_se = [n](double s, double ss) {
    const double mean = s / n;
    const double var = std::max(0.0, ss / n - mean * mean);
    return std::sqrt(var / std::max<std::int64_t>(1, n - 1));
  };

  SupermartingaleStudy st;
  st.times = grid;
  st.m_mean.resize(nt);
  st.m_se.resize(nt);
  for (std::size_t k = 0; k < nt; ++k) {
    st.m_mean[k] = sum[k] / n;
    st.m_se[k] = mk_se(sum[k], sumsq[k]);
  }
  st.step_diff_mean.resize(nt - 1);
  st.step_diff_se.resize(nt - 1);
  for (std::size_t k = 0; k + 1 < nt; ++k) {
    st.step_diff_mean[k] = dsum[k] / n;
    st.step_diff_se[k] = mk_se(dsum[k], dsumsq[k]);
  }
  st.integral_mean = isum / n;
  st.integral_se = mk_se(isum, isumsq);
  st.m0 = params.s0 * vf.g_prime_at(params.phi0 / params.s0);
  return st;
}

inline nlohmann::json to_json(const MCEstimate& e, const MarketParams& p,
                              const std::string& policy_name) {
  return nlohmann::json{{"params",
                         {{"mu", p.mu},
                          {"sigma", p.sigma},
                          {"lambda_impact", p.lambda_impact},
                          {"s0", p.s0},
                          {"phi0", p.phi0}}},
                        {"policy", policy_name},
                        {"mean", e.mean},
                        {"se", e.std_error},
                        {"ci95", {e.ci95_lo, e.ci95_hi}},
                        {"n_paths", e.n_paths},
                        {"T", e.horizon},
                        {"tail_bound", e.tail_bound},
                        {"seed", e.seed},
                        {"divergence_warning", e.divergence_warning}};
}

inline void write_csv(const std::vector<ComparisonRow>& rows,
                      std::ostream& os) {
  os << "policy,mean,se,diff_vs_optimal,diff_se\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%.17g,%.17g,%.17g,%.17g\n",
                  r.policy.c_str(), r.mean, r.std_error, r.diff_vs_first,
                  r.diff_std_error);
    os << buf;
  }
}

}  // namespace optexec
