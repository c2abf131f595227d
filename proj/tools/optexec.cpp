// optexec: batch front end for the execution-problem toolkit.
//
// Subcommands: solve, closed-form, simulate, estimate, compare, oracle.
// Configuration is a single JSON document; flags override config fields
// (precedence flag > config > default).  Every subcommand writes its
// artifacts under the output directory and prints one JSON summary line on
// stdout.  Exit codes: 0 ok, 1 config error, 2 regime error, 3 missing
// artifact, 4 validation failure.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "optexec/closed_form.hpp"
#include "optexec/dp_oracle.hpp"
#include "optexec/errors.hpp"
#include "optexec/market_model.hpp"
#include "optexec/monte_carlo.hpp"
#include "optexec/strategy_engine.hpp"
#include "optexec/value_ode.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct MissingArtifactError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Ctx {
  json cfg = json::object();
  optexec::MarketParams params;
  std::uint64_t seed = 0x5eed0001ULL;
  fs::path out = ".";
};

template <class T>
T cfg_get(const json& j, const std::string& key, T fallback) {
  if (!j.is_object() || !j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw optexec::ConfigurationError("config field '" + key +
                                      "' has the wrong type");
  }
}

json cfg_block(const json& cfg, const std::string& key) {
  if (!cfg.contains(key)) return json::object();
  if (!cfg.at(key).is_object())
    throw optexec::ConfigurationError("config field '" + key +
                                      "' must be an object");
  return cfg.at(key);
}

Ctx make_ctx(const std::string& config_path, const std::string& seed_flag,
             const std::string& out_flag) {
  Ctx c;
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) throw optexec::ConfigurationError("cannot open config file: " +
                                               config_path);
    try {
      in >> c.cfg;
    } catch (const json::exception& e) {
      throw optexec::ConfigurationError(std::string("config parse error: ") +
                                        e.what());
    }
  }
  const json p = cfg_block(c.cfg, "params");
  c.params.mu = cfg_get(p, "mu", c.params.mu);
  c.params.sigma = cfg_get(p, "sigma", c.params.sigma);
  c.params.lambda_impact = cfg_get(p, "lambda_impact", c.params.lambda_impact);
  c.params.s0 = cfg_get(p, "s0", c.params.s0);
  c.params.phi0 = cfg_get(p, "phi0", c.params.phi0);
  try {
    c.params.validate();
  } catch (const std::invalid_argument& e) {
    throw optexec::ConfigurationError(std::string("params: ") + e.what());
  }
  c.seed = cfg_get<std::uint64_t>(c.cfg, "seed", c.seed);
  c.out = cfg_get<std::string>(c.cfg, "output_dir", ".");
  if (!seed_flag.empty()) c.seed = std::stoull(seed_flag);
  if (!out_flag.empty()) c.out = out_flag;
  fs::create_directories(c.out);
  return c;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << text;
}

template <class Fn>
void write_stream(const fs::path& path, Fn&& fn) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  fn(os);
}

optexec::SolveOptions solve_options(const json& cfg) {
  const json s = cfg_block(cfg, "solver");
  optexec::SolveOptions opt;
  opt.x_max = cfg_get(s, "x_max", opt.x_max);
  opt.tol = cfg_get(s, "tol", opt.tol);
  opt.n_grid = cfg_get(s, "n_grid", opt.n_grid);
  opt.x0 = cfg_get(s, "x0", opt.x0);
  return opt;
}

optexec::MCOptions mc_options(const Ctx& c) {
  const json m = cfg_block(c.cfg, "mc");
  optexec::MCOptions opt;
  opt.n_paths = cfg_get(m, "n_paths", opt.n_paths);
  opt.horizon = cfg_get(m, "horizon", opt.horizon);
  opt.n_steps = cfg_get(m, "n_steps", opt.n_steps);
  opt.substeps = cfg_get(m, "substeps", opt.substeps);
  opt.antithetic = cfg_get(m, "antithetic", opt.antithetic);
  opt.seed = c.seed;
  return opt;
}

// The stationary solve is cheap, but estimate/compare/simulate treat the
// persisted value function as an input artifact so runs are reproducible
// against a frozen solve.
optexec::ValueFunction load_value_function(const Ctx& c) {
  const fs::path path =
      cfg_get<std::string>(c.cfg, "value_function",
                           (c.out / "value_function.json").string());
  std::ifstream in(path);
  if (!in)
    throw MissingArtifactError("value function artifact not found: " +
                               path.string() + " (run `optexec solve` first)");
  json j;
  try {
    in >> j;
    auto vf = optexec::value_function_from_json(j);
    if (vf.params.mu != c.params.mu || vf.params.sigma != c.params.sigma ||
        vf.params.lambda_impact != c.params.lambda_impact)
      throw MissingArtifactError(
          "value function artifact was solved for different (mu, sigma, "
          "lambda_impact): " + path.string());
    return vf;
  } catch (const json::exception& e) {
    throw MissingArtifactError("value function artifact unreadable: " +
                               path.string() + ": " + e.what());
  }
}

// Policy spec strings: "optimal", "exponential:<c>", "constant:<T>".
optexec::Policy make_policy(const Ctx& c, const std::string& spec,
                            const optexec::ValueFunction* vf) {
  if (spec == "optimal") {
    if (!vf)
      throw MissingArtifactError("policy 'optimal' needs a value function");
    return optexec::optimal_feedback_checked(*vf, c.params);
  }
  const auto colon = spec.find(':');
  const std::string kind = spec.substr(0, colon);
  double arg = 0.0;
  if (colon != std::string::npos) {
    try {
      arg = std::stod(spec.substr(colon + 1));
    } catch (const std::exception&) {
      throw optexec::ConfigurationError("bad policy argument in '" + spec +
                                        "'");
    }
  }
  if (kind == "exponential") {
    if (colon == std::string::npos)
      throw optexec::ConfigurationError("policy 'exponential' needs ':<c>'");
    return optexec::exponential_rate(arg, c.params.phi0);
  }
  if (kind == "constant") {
    if (colon == std::string::npos)
      throw optexec::ConfigurationError("policy 'constant' needs ':<T>'");
    return optexec::constant_rate(arg, c.params.phi0);
  }
  throw optexec::ConfigurationError(
      "unknown policy '" + spec +
      "' (expected optimal | exponential:<c> | constant:<T>)");
}

double resolve_horizon(const Ctx& c, optexec::MCOptions& opt,
                       const optexec::ValueFunction* vf) {
  if (opt.horizon > 0.0) return opt.horizon;
  if (!(c.params.mu < 0.0))
    throw optexec::ConfigurationError(
        "mc.horizon must be given explicitly when mu >= 0 (no tail rule)");
  const double ref = vf ? vf->value_of(c.params.phi0, c.params.s0)
                        : c.params.phi0 * c.params.s0;
  opt.horizon = optexec::horizon_for_tail(c.params, ref);
  return opt.horizon;
}

void print_summary(json j) { std::cout << j.dump() << "\n"; }

int cmd_solve(const Ctx& c) {
  const auto opt = solve_options(c.cfg);
  const auto vf = optexec::integrate_value_ode(c.params, opt);
  const auto rep = optexec::validate(vf);

  const fs::path jpath = c.out / "value_function.json";
  const fs::path cpath = c.out / "value_function.csv";
  write_text(jpath, optexec::to_json(vf).dump(2) + "\n");
  write_stream(cpath, [&](std::ostream& os) { optexec::write_csv(vf, os); });

  const bool ok = rep.ok(10.0 * opt.tol);
  print_summary(json{{"command", "solve"},
                     {"g_at_x0", vf.value_of(c.params.phi0, c.params.s0)},
                     {"x_series_cutoff", vf.x_series_cutoff},
                     {"residual_sup", rep.residual_sup},
                     {"monotone", rep.monotone},
                     {"concave", rep.concave},
                     {"bounds_ok", rep.bounds_ok},
                     {"ok", ok},
                     {"artifacts", {jpath.string(), cpath.string()}}});
  return ok ? 0 : 4;
}

int cmd_closed_form(const Ctx& c) {
  const auto cp = [&] {
    try {
      return optexec::CriticalParams::from_market(c.params);
    } catch (const std::invalid_argument& e) {
      throw optexec::RegimeError(e.what());
    }
  }();
  const json b = cfg_block(c.cfg, "closed_form");
  const double x_max = cfg_get(b, "x_max", 10.0);
  const int n = cfg_get(b, "n_points", 200);
  if (!(x_max > 0.0) || n < 2)
    throw optexec::ConfigurationError("closed_form: x_max > 0, n_points >= 2");
  std::vector<double> xs(n);
  for (int i = 0; i < n; ++i) xs[i] = x_max * (i + 1) / n;

  const fs::path hpath = c.out / "h_table.csv";
  const fs::path gpath = c.out / "g_table.csv";
  write_stream(hpath, [&](std::ostream& os) {
    optexec::write_h_table_csv(cp, xs, os);
  });
  write_stream(gpath, [&](std::ostream& os) {
    optexec::write_g_table_csv(cp, xs, os);
  });

  const double y_star = cp.lambda_impact * cp.sigma * cp.sigma;
  print_summary(json{{"command", "closed-form"},
                     {"h_at_lambda_sigma2", optexec::h_ratio(y_star, cp)},
                     {"g_at_1", optexec::g_critical(1.0, cp)},
                     {"artifacts", {hpath.string(), gpath.string()}}});
  return 0;
}

int cmd_simulate(const Ctx& c) {
  const json b = cfg_block(c.cfg, "simulate");
  const std::string spec = cfg_get<std::string>(b, "policy", "optimal");
  optexec::ValueFunction vf;
  const bool needs_vf = spec == "optimal";
  if (needs_vf) vf = load_value_function(c);
  const auto policy = make_policy(c, spec, needs_vf ? &vf : nullptr);

  optexec::MCOptions mc = mc_options(c);
  mc.horizon = cfg_get(b, "horizon", mc.horizon);
  mc.n_steps = cfg_get(b, "n_steps", mc.n_steps);
  mc.substeps = cfg_get(b, "substeps", mc.substeps);
  resolve_horizon(c, mc, needs_vf ? &vf : nullptr);

  const auto grid = optexec::uniform_grid(mc.horizon, mc.n_steps);
  const auto path = optexec::simulate_gbm(c.params, grid, mc.seed, 0);
  const auto res = optexec::simulate_execution(policy, path, c.params.phi0,
                                               mc.substeps, c.params);
  const fs::path epath = c.out / "execution.csv";
  if (needs_vf) {
    const auto mp = optexec::supermartingale_diagnostic(res, path, vf);
    write_stream(epath, [&](std::ostream& os) {
      optexec::write_csv(res, path, os, &mp);
    });
  } else {
    write_stream(epath, [&](std::ostream& os) {
      optexec::write_csv(res, path, os);
    });
  }

  json summary{{"command", "simulate"},
               {"policy", policy.name},
               {"T", mc.horizon},
               {"seed", mc.seed},
               {"v_realized", res.v_realized},
               {"inventory_end", res.inventory.back()},
               {"artifacts", {epath.string()}}};
  if (std::isfinite(res.hit_time)) summary["hit_time"] = res.hit_time;
  print_summary(summary);
  return 0;
}

int cmd_estimate(const Ctx& c) {
  const json b = cfg_block(c.cfg, "estimate");
  const std::string spec = cfg_get<std::string>(b, "policy", "optimal");
  optexec::ValueFunction vf;
  const bool needs_vf = spec == "optimal";
  if (needs_vf) vf = load_value_function(c);
  const auto policy = make_policy(c, spec, needs_vf ? &vf : nullptr);

  optexec::MCOptions mc = mc_options(c);
  resolve_horizon(c, mc, needs_vf ? &vf : nullptr);
  const auto est = optexec::estimate_value(c.params, policy, mc);

  json j = optexec::to_json(est, c.params, policy.name);
  const fs::path jpath = c.out / "estimate.json";
  write_text(jpath, j.dump(2) + "\n");

  j["command"] = "estimate";
  j["artifacts"] = {jpath.string()};
  if (needs_vf) j["solver_value"] = vf.value_of(c.params.phi0, c.params.s0);
  print_summary(j);
  return 0;
}

int cmd_compare(const Ctx& c) {
  const auto vf = load_value_function(c);
  const json b = cfg_block(c.cfg, "compare");
  std::vector<double> cs =
      cfg_get(b, "exponential_c", std::vector<double>{0.1, 0.5, 1.0, 2.0});

  std::vector<optexec::Policy> policies;
  policies.push_back(optexec::optimal_feedback_checked(vf, c.params));
  for (double cc : cs)
    policies.push_back(optexec::exponential_rate(cc, c.params.phi0));
  for (const auto& spec :
       cfg_get(b, "extra_policies", std::vector<std::string>{}))
    policies.push_back(make_policy(c, spec, &vf));

  optexec::MCOptions mc = mc_options(c);
  resolve_horizon(c, mc, &vf);
  const auto rows = optexec::compare_policies(c.params, policies, mc);

  const fs::path cpath = c.out / "compare.csv";
  write_stream(cpath, [&](std::ostream& os) { optexec::write_csv(rows, os); });

  json jr = json::array();
  for (const auto& r : rows)
    jr.push_back(json{{"policy", r.policy},
                      {"mean", r.mean},
                      {"se", r.std_error},
                      {"diff_vs_optimal", r.diff_vs_first},
                      {"diff_se", r.diff_std_error}});
  print_summary(json{{"command", "compare"},
                     {"T", mc.horizon},
                     {"n_paths", mc.n_paths},
                     {"seed", mc.seed},
                     {"rows", jr},
                     {"artifacts", {cpath.string()}}});
  return 0;
}

int cmd_oracle(const Ctx& c) {
  const json b = cfg_block(c.cfg, "oracle");
  const double horizon = cfg_get(b, "horizon", 40.0);
  const double x_max = cfg_get(b, "x_max", 14.0);
  const int nx = cfg_get(b, "nx", 400);
  const int snapshots = cfg_get(b, "snapshots", 201);
  long nt = cfg_get<long>(b, "nt", 0);
  if (nt <= 0) nt = optexec::required_nt(c.params, horizon, x_max, nx);
  const auto grid = optexec::march_hjb(c.params, horizon, x_max, nx, nt,
                                       snapshots);

  // comparison target: a frozen solve artifact if present, else a fresh solve
  optexec::ValueFunction vf;
  try {
    vf = load_value_function(c);
  } catch (const MissingArtifactError&) {
    vf = optexec::integrate_value_ode(c.params, solve_options(c.cfg));
  }
  const double x_lo = cfg_get(b, "x_lo", 0.1);
  const double x_hi = cfg_get(b, "x_hi", std::min(5.0, x_max));
  const double dev = optexec::max_deviation(grid, vf, x_lo, x_hi);

  const fs::path hpath = c.out / "hjb.csv";
  write_stream(hpath, [&](std::ostream& os) { optexec::write_csv(grid, os); });

  print_summary(json{{"command", "oracle"},
                     {"T", horizon},
                     {"nx", nx},
                     {"nt", nt},
                     {"cfl_ratio", grid.cfl_ratio},
                     {"max_abs_dev_u0_vs_g", dev},
                     {"compare_range", {x_lo, x_hi}},
                     {"tail_certificate",
                      optexec::tail_bound(c.params, horizon)},
                     {"artifacts", {hpath.string()}}});
  const double gate = cfg_get(b, "max_dev_gate", 0.0);
  return (gate > 0.0 && dev > gate) ? 4 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stationary optimal-execution toolkit"};
  app.require_subcommand(1);

  std::string config_path, seed_flag, out_flag;
  app.add_option("--config", config_path, "JSON config file");
  app.add_option("--seed", seed_flag, "RNG seed (overrides config)");
  app.add_option("--out", out_flag, "output directory (overrides config)");

  auto* solve = app.add_subcommand("solve", "solve the stationary value ODE");
  auto* closed =
      app.add_subcommand("closed-form", "critical-case closed-form tables");
  auto* simulate =
      app.add_subcommand("simulate", "one execution path with diagnostics");
  auto* estimate =
      app.add_subcommand("estimate", "Monte Carlo value of a policy");
  auto* compare =
      app.add_subcommand("compare", "CRN comparison against the optimum");
  auto* oracle =
      app.add_subcommand("oracle", "finite-horizon HJB cross-check");
  for (auto* sub : {solve, closed, simulate, estimate, compare, oracle}) {
    sub->add_option("--config", config_path);
    sub->add_option("--seed", seed_flag);
    sub->add_option("--out", out_flag);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    const Ctx ctx = make_ctx(config_path, seed_flag, out_flag);
    if (solve->parsed()) return cmd_solve(ctx);
    if (closed->parsed()) return cmd_closed_form(ctx);
    if (simulate->parsed()) return cmd_simulate(ctx);
    if (estimate->parsed()) return cmd_estimate(ctx);
    if (compare->parsed()) return cmd_compare(ctx);
    if (oracle->parsed()) return cmd_oracle(ctx);
    std::cerr << "error: no subcommand\n";
    return 1;
  } catch (const optexec::RegimeError& e) {
    std::cerr << "regime error: " << e.what() << "\n";
    return 2;
  } catch (const MissingArtifactError& e) {
    std::cerr << "missing artifact: " << e.what() << "\n";
    return 3;
  } catch (const optexec::ConfigurationError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const optexec::CutoffTooLargeError& e) {
    std::cerr << "validation failure: " << e.what() << "\n";
    return 4;
  } catch (const optexec::MonotonicityError& e) {
    std::cerr << "validation failure: " << e.what() << "\n";
    return 4;
  } catch (const optexec::NumericalBlowupError& e) {
    std::cerr << "validation failure: " << e.what() << "\n";
    return 4;
  } catch (const optexec::CflError& e) {
    std::cerr << "validation failure: " << e.what() << "\n";
    return 4;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
