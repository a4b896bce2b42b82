#pragma once

// Command dispatch for the hmbandit tool. Argument parsing lives in the tool
// itself; everything here works on an already-parsed CliOptions so that tests
// can drive commands directly.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hmbandit/arm_model.hpp"
#include "hmbandit/config.hpp"
#include "hmbandit/error.hpp"
#include "hmbandit/index.hpp"
#include "hmbandit/io.hpp"
#include "hmbandit/simulator.hpp"
#include "hmbandit/value_iteration.hpp"

namespace hmb {

enum ExitCode : int { kExitOk = 0, kExitConfig = 2, kExitNumeric = 3, kExitOracle = 4 };

inline int exit_code(Errc code) {
  switch (code) {
    case Errc::ParseError:
    case Errc::ValidationError:
    case Errc::OutOfRange:
    case Errc::OrderViolation:
      return kExitConfig;
    default:
      return kExitNumeric;
  }
}

inline const std::vector<std::string>& cli_commands() {
  static const std::vector<std::string> names{"validate",     "solve",    "threshold",
                                              "whittle",      "indexability", "simulate",
                                              "oracle-check"};
  return names;
}

struct CliOptions {
  std::string command;
  std::string config;
  std::string out = ".";
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> grid;
  std::optional<double> tol;
  std::size_t arm = 0;
};

namespace detail {

using ojson = nlohmann::ordered_json;

struct Context {
  const CliOptions& opts;
  RunConfig cfg;
  std::filesystem::path out;
  std::ostream& log;

  const ArmParams& arm() const {
    if (opts.arm >= cfg.arms.size()) {
      throw Error(Errc::ValidationError, "--arm " + std::to_string(opts.arm) +
                                             " but the config has " +
                                             std::to_string(cfg.arms.size()) + " arm(s)");
    }
    return cfg.arms[opts.arm];
  }

  double subsidy() const { return cfg.eta2.value_or(arm().eta2()); }

  BeliefGrid grid() const { return BeliefGrid::uniform(cfg.grid); }
  SolveOptions solve_options() const { return {cfg.tol, cfg.max_sweeps}; }

  ojson header() const {
    ojson j;
    j["command"] = opts.command;
    j["schema_version"] = cfg.schema_version;
    j["beta"] = cfg.beta;
    j["grid"] = cfg.grid;
    j["tol"] = cfg.tol;
    j["max_sweeps"] = cfg.max_sweeps;
    j["pi_tol"] = cfg.pi_tol;
    j["index_tol"] = cfg.index_tol;
    j["seed"] = cfg.seed;
    j["arm_index"] = opts.arm;
    auto& arms = j["arms"] = ojson::array();
    for (const ArmParams& a : cfg.arms) arms.push_back(to_json(a));
    return j;
  }

  std::ofstream open(const std::string& name) const {
    std::ofstream f(out / name, std::ios::binary);
    if (!f) throw Error(Errc::ValidationError, "cannot write " + (out / name).string());
    f.precision(17);
    return f;
  }

  void write_summary(const ojson& j) const { open("summary.json") << j.dump(2) << '\n'; }
};

inline int cmd_validate(Context& c) {
  ojson j = c.header();
  auto& info = j["classification"] = ojson::array();
  for (const ArmParams& a : c.cfg.arms) {
    ojson e;
    e["special_case"] = to_string(special_case(a));
    e["lipschitz_conditions"] = lipschitz_conditions(a);
    if (supports_regions(a)) {
      try {
        const RegionBounds b = region_bounds(a);
        e["region_bounds"] = {{"mu1", b.mu1},
                              {"gamma1_inf", b.gamma1_inf},
                              {"gamma2_inf", b.gamma2_inf},
                              {"gamma0_inf", b.gamma0_inf},
                              {"mu0", b.mu0}};
      } catch (const Error& err) {
        e["region_bounds"] = err.what();
      }
    } else {
      e["region_bounds"] = nullptr;
    }
    info.push_back(e);
  }
  c.write_summary(j);
  c.log << "valid: " << c.cfg.arms.size() << " arm(s)\n";
  return kExitOk;
}

inline int cmd_solve(Context& c) {
  const double eta2 = c.subsidy();
  const ValueTable t = solve(c.arm(), eta2, Discount(c.cfg.beta), c.grid(), c.solve_options());
  {
    auto f = c.open("value_table.csv");
    write_value_table_csv(f, t);
  }
  ojson j = c.header();
  j["eta2"] = eta2;
  j["iterations"] = t.iterations;
  j["residual"] = t.residual;
  j["convexity_violations"] = convexity_report(t).size();
  c.write_summary(j);
  c.log << "solved in " << t.iterations << " sweeps, residual " << t.residual << '\n';
  return kExitOk;
}

inline int cmd_threshold(Context& c) {
  std::vector<double> etas = c.cfg.eta2_values();
  if (etas.empty()) etas.push_back(c.subsidy());
  const ThresholdOptions topts{c.solve_options(), c.cfg.pi_tol};
  const ThresholdCurve curve =
      threshold_curve(c.arm(), etas, Discount(c.cfg.beta), c.grid(), topts);
  {
    auto f = c.open("threshold.csv");
    write_threshold_csv(f, curve.points);
  }
  ojson j = c.header();
  auto& res = j["results"] = ojson::array();
  for (const ThresholdResult& r : curve.points) {
    res.push_back(to_json(r));
    c.log << "eta2 " << fmt(r.eta2) << ": " << to_string(r.regime) << ", pi_T = " << r.pi_t
          << '\n';
  }
  c.write_summary(j);
  return kExitOk;
}

inline int cmd_indexability(Context& c) {
  std::vector<double> etas = c.cfg.eta2_values();
  if (etas.size() < 2) {
    etas = eta2_ladder(c.arm().rho0() - 0.1, c.arm().rho1() + 0.1, 0.01);
  }
  const ThresholdOptions topts{c.solve_options(), c.cfg.pi_tol};
  const ThresholdCurve curve =
      threshold_curve(c.arm(), etas, Discount(c.cfg.beta), c.grid(), topts);
  const IndexabilityReport rep = indexability_check(curve);
  {
    auto f = c.open("threshold_curve.csv");
    write_threshold_csv(f, curve.points);
  }
  ojson j = c.header();
  j["eta2_values"] = etas;
  j["report"] = to_json(rep);
  c.write_summary(j);
  c.log << "pi_T trend " << to_string(rep.pi_t_trend) << "; indexable "
        << (rep.indexable ? "yes" : "no") << ", epsilon-indexable "
        << (rep.epsilon_indexable ? "yes" : "no") << '\n';
  return kExitOk;
}

inline WhittleTableOptions whittle_options(const RunConfig& cfg) {
  WhittleTableOptions o;
  o.mode = cfg.whittle.mode;
  o.vi_grid_points = cfg.whittle.vi_grid;
  o.verify = cfg.whittle.verify;
  o.scan_step = cfg.whittle.scan_step;
  o.numeric.solve.tol = cfg.tol;
  o.numeric.solve.max_sweeps = cfg.max_sweeps;
  o.numeric.index_tol = cfg.index_tol;
  return o;
}

inline std::vector<double> whittle_points(const RunConfig& cfg) {
  if (cfg.whittle.points == 2) return {0.0, 1.0};
  const BeliefGrid g = BeliefGrid::uniform(cfg.whittle.points);
  return {g.nodes().begin(), g.nodes().end()};
}

inline int cmd_whittle(Context& c) {
  const WhittleTable t = whittle_table(c.arm(), Discount(c.cfg.beta), whittle_points(c.cfg),
                                       whittle_options(c.cfg));
  {
    auto f = c.open("whittle.csv");
    write_whittle_csv(f, t);
  }
  ojson j = c.header();
  j["whittle"] = {{"points", c.cfg.whittle.points},
                  {"mode", c.cfg.whittle.mode == NumericMode::Scan ? "scan" : "bisection"},
                  {"vi_grid", c.cfg.whittle.vi_grid},
                  {"verify", c.cfg.whittle.verify},
                  {"scan_step", c.cfg.whittle.scan_step}};
  std::map<std::string, std::size_t> counts;
  for (const WhittleEntry& e : t.entries) ++counts[e.method.str()];
  j["methods"] = counts;
  auto& disc = j["discrepancies"] = ojson::array();
  for (const WhittleDiscrepancy& d : t.discrepancies) disc.push_back(to_json(d));
  c.write_summary(j);
  c.log << t.entries.size() << " entries, " << t.discrepancies.size()
        << " closed-form discrepancies\n";
  return kExitOk;
}

inline int cmd_simulate(Context& c) {
  BanditConfig bc;
  bc.arms = c.cfg.arms;
  bc.beta = c.cfg.beta;
  bc.horizon = c.cfg.simulation.horizon;
  bc.iterations = c.cfg.simulation.iterations;
  bc.seed = c.cfg.seed;
  bc.initial_mode = c.cfg.simulation.initial_mode;
  bc.initial_beliefs = c.cfg.simulation.initial_beliefs;

  std::vector<WhittleTable> tables;
  std::vector<Policy> policies;
  for (const std::string& name : c.cfg.simulation.policies) {
    if (name == "whittle") {
      if (tables.empty()) {
        const auto pis = whittle_points(c.cfg);
        const auto wopts = whittle_options(c.cfg);
        for (const ArmParams& a : bc.arms) {
          tables.push_back(whittle_table(a, Discount(bc.beta), pis, wopts));
        }
      }
      policies.emplace_back(WhittlePolicy{&tables});
    } else if (name == "myopic") {
      policies.emplace_back(MyopicPolicy{});
    } else {
      policies.emplace_back(RandomPolicy{});
    }
  }

  const SimStats stats = monte_carlo(bc, policies);
  {
    auto f = c.open("sim.csv");
    write_sim_csv(f, stats);
  }
  for (const Policy& p : policies) {
    auto f = c.open("trace_" + policy_name(p) + ".csv");
    write_trace_csv(f, run_episode(bc, p, 0));
  }

  ojson j = c.header();
  j["simulation"] = {{"horizon", bc.horizon},
                     {"iterations", bc.iterations},
                     {"initial_beliefs", bc.initial_mode == InitialBeliefMode::Random
                                             ? ojson("random")
                                             : ojson(bc.initial_beliefs)},
                     {"average_from", c.cfg.simulation.average_from}};
  auto& res = j["policies"] = ojson::array();
  for (const PolicyStats& p : stats.policies) {
    const std::size_t from = std::min(c.cfg.simulation.average_from, bc.horizon - 1);
    const double avg = p.time_average(from, bc.horizon);
    res.push_back({{"name", p.name},
                   {"mean_discounted", p.mean_discounted},
                   {"stderr_discounted", p.stderr_discounted},
                   {"time_average", avg}});
    c.log << p.name << ": time-averaged reward " << avg << ", discounted " << p.mean_discounted
          << '\n';
  }
  auto& disc = j["whittle_discrepancies"] = ojson::array();
  for (std::size_t n = 0; n < tables.size(); ++n) {
    for (const WhittleDiscrepancy& d : tables[n].discrepancies) {
      ojson e = to_json(d);
      e["arm"] = n;
      disc.push_back(e);
    }
  }
  c.write_summary(j);
  return kExitOk;
}

inline int cmd_oracle_check(Context& c) {
  const Discount beta(c.cfg.beta);
  const int horizon = c.cfg.oracle.horizon;
  const BeliefGrid grid = c.grid();
  Stream rng(c.cfg.seed, 0, 0);
  auto f = c.open("oracle.csv");
  f << "arm,pi,grid_value,oracle_value,bound,ok\n";
  std::size_t failures = 0;
  ojson j = c.header();
  j["oracle"] = {{"horizon", horizon}, {"samples", c.cfg.oracle.samples}};
  auto& per_arm = j["results"] = ojson::array();
  for (std::size_t n = 0; n < c.cfg.arms.size(); ++n) {
    const ArmParams& a = c.cfg.arms[n];
    const double eta2 = c.cfg.eta2.value_or(a.eta2());
    const ValueTable t = solve(a, eta2, beta, grid, c.solve_options());
    const double bound = oracle_tolerance(a, eta2, beta, horizon, grid.spacing()) + c.cfg.tol;
    double worst = 0.0;
    std::size_t arm_failures = 0;
    for (std::size_t k = 0; k < c.cfg.oracle.samples; ++k) {
      const double pi = rng.uniform();
      const double gv = t.eval(pi);
      const double ov = finite_horizon_oracle(a, eta2, beta, pi, horizon);
      const bool ok = std::abs(gv - ov) <= bound;
      worst = std::max(worst, std::abs(gv - ov));
      if (!ok) ++arm_failures;
      f << n << ',' << fmt(pi) << ',' << fmt(gv) << ',' << fmt(ov) << ',' << fmt(bound) << ','
        << (ok ? 1 : 0) << '\n';
    }
    failures += arm_failures;
    per_arm.push_back(
        {{"arm", n}, {"eta2", eta2}, {"bound", bound}, {"max_gap", worst}, {"failures", arm_failures}});
  }
  j["passed"] = failures == 0;
  c.write_summary(j);
  c.log << (failures == 0 ? "oracle check passed" : "oracle check FAILED") << " (" << failures
        << " failing samples)\n";
  return failures == 0 ? kExitOk : kExitOracle;
}

}  // namespace detail

/// Runs one command and returns the process exit status. Diagnostics go to err.
inline int dispatch(const CliOptions& opts, std::ostream& log = std::cout,
                    std::ostream& err = std::cerr) {
  static const std::map<std::string, std::function<int(detail::Context&)>> table{
      {"validate", detail::cmd_validate},         {"solve", detail::cmd_solve},
      {"threshold", detail::cmd_threshold},       {"whittle", detail::cmd_whittle},
      {"indexability", detail::cmd_indexability}, {"simulate", detail::cmd_simulate},
      {"oracle-check", detail::cmd_oracle_check}};
  try {
    const auto it = table.find(opts.command);
    if (it == table.end()) throw Error(Errc::ValidationError, "unknown command " + opts.command);
    RunConfig cfg = parse_config(opts.config);
    if (opts.seed) cfg.seed = *opts.seed;
    if (opts.grid) {
      if (*opts.grid < 3) throw Error(Errc::ValidationError, "--grid needs at least 3 nodes");
      cfg.grid = *opts.grid;
    }
    if (opts.tol) {
      if (!(*opts.tol > 0.0)) throw Error(Errc::ValidationError, "--tol must be positive");
      cfg.tol = *opts.tol;
    }
    std::filesystem::create_directories(opts.out);
    detail::Context ctx{opts, std::move(cfg), opts.out, log};
    return it->second(ctx);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code(e.code());
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  }
}

}  // namespace hmb
