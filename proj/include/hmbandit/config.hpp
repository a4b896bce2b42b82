#pragma once

// JSON run configuration. Every key is checked against a fixed schema and
// errors name the offending field, e.g. "arms[3].mu0".

#include <cstddef>
#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hmbandit/arm_model.hpp"
#include "hmbandit/error.hpp"
#include "hmbandit/index.hpp"
#include "hmbandit/simulator.hpp"

namespace hmb {

inline constexpr int kSchemaVersion = 1;

struct Eta2Sweep {
  double from = 0.0;
  double to = 0.0;
  double step = 0.01;
};

struct WhittleSettings {
  std::size_t points = 201;
  NumericMode mode = NumericMode::Scan;
  std::size_t vi_grid = 2001;
  bool verify = false;
  double scan_step = 0.005;
};

struct SimulationSettings {
  std::size_t horizon = 2000;
  std::size_t iterations = 100;
  InitialBeliefMode initial_mode = InitialBeliefMode::Random;
  std::vector<double> initial_beliefs;
  std::vector<std::string> policies{"whittle", "myopic", "random"};
  std::size_t average_from = 100;
};

struct OracleSettings {
  int horizon = 12;
  std::size_t samples = 50;
};

struct RunConfig {
  int schema_version = kSchemaVersion;
  Validation validation = Validation::Strict;
  std::vector<ArmParams> arms;
  double beta = 0.99;
  std::optional<double> eta2;
  std::vector<double> eta2_list;
  std::optional<Eta2Sweep> eta2_sweep;
  std::size_t grid = 2001;
  double tol = 1e-9;
  std::size_t max_sweeps = 1'000'000;
  double pi_tol = 1e-6;
  double index_tol = 1e-6;
  std::uint64_t seed = 1;
  WhittleSettings whittle;
  SimulationSettings simulation;
  OracleSettings oracle;

  /// Explicit list, else the sweep expanded, else the single eta2.
  std::vector<double> eta2_values() const {
    if (!eta2_list.empty()) return eta2_list;
    if (eta2_sweep) return eta2_ladder(eta2_sweep->from, eta2_sweep->to, eta2_sweep->step);
    if (eta2) return {*eta2};
    return {};
  }
};

namespace detail {

using json = nlohmann::json;

[[noreturn]] inline void invalid(const std::string& path, const std::string& what) {
  throw Error(Errc::ValidationError, path + ": " + what);
}

inline void only_keys(const json& obj, const std::string& path,
                      std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) invalid(path.empty() ? "<root>" : path, "expected an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : obj.items()) {
    if (!ok.count(key)) invalid(path.empty() ? key : path + "." + key, "unknown key");
  }
}

inline std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

inline double get_number(const json& obj, const std::string& path, const char* key) {
  const std::string p = join(path, key);
  if (!obj.contains(key)) invalid(p, "missing required field");
  if (!obj[key].is_number()) invalid(p, "expected a number");
  return obj[key].get<double>();
}

inline std::optional<double> opt_number(const json& obj, const std::string& path,
                                        const char* key) {
  if (!obj.contains(key)) return std::nullopt;
  return get_number(obj, path, key);
}

inline std::optional<std::uint64_t> opt_count(const json& obj, const std::string& path,
                                              const char* key) {
  if (!obj.contains(key)) return std::nullopt;
  const json& v = obj[key];
  if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
    invalid(join(path, key), "expected a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

inline ArmParams parse_arm(const json& obj, const std::string& path, Validation mode) {
  only_keys(obj, path,
            {"lambda0", "lambda1", "mu0", "mu1", "rho0", "rho1", "eta0", "eta1", "eta2"});
  RawArm raw;
  raw.lambda0 = get_number(obj, path, "lambda0");
  raw.lambda1 = get_number(obj, path, "lambda1");
  raw.mu0 = get_number(obj, path, "mu0");
  raw.mu1 = get_number(obj, path, "mu1");
  raw.rho0 = get_number(obj, path, "rho0");
  raw.rho1 = get_number(obj, path, "rho1");
  raw.eta0 = get_number(obj, path, "eta0");
  raw.eta1 = get_number(obj, path, "eta1");
  raw.eta2 = opt_number(obj, path, "eta2").value_or(0.0);
  const std::pair<const char*, double> probs[] = {
      {"lambda0", raw.lambda0}, {"lambda1", raw.lambda1}, {"mu0", raw.mu0},
      {"mu1", raw.mu1},         {"rho0", raw.rho0},       {"rho1", raw.rho1}};
  for (const auto& [name, value] : probs) {
    if (!(value >= 0.0 && value <= 1.0)) {
      std::ostringstream os;
      os << value << " is not a probability";
      invalid(join(path, name), os.str());
    }
  }
  try {
    return ArmParams::validate(raw, mode);
  } catch (const Error& e) {
    invalid(path, e.what());
  }
}

}  // namespace detail

inline RunConfig parse_config_text(const std::string& text, const std::string& source = "config") {
  using detail::json;
  using detail::invalid;
  json root;
  try {
    root = json::parse(text, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw Error(Errc::ParseError, source + ": " + e.what());
  }
  if (root.is_discarded() || root.is_null()) throw Error(Errc::ParseError, source + ": empty document");

  detail::only_keys(root, "",
                    {"schema_version", "validation", "arm", "arms", "beta", "eta2", "eta2_list",
                     "eta2_sweep", "grid", "tol", "max_sweeps", "pi_tol", "index_tol", "seed", "whittle",
                     "simulation", "oracle"});
  RunConfig cfg;

  if (!root.contains("schema_version")) invalid("schema_version", "missing required field");
  const auto version = detail::opt_count(root, "", "schema_version");
  if (*version != static_cast<std::uint64_t>(kSchemaVersion)) {
    invalid("schema_version", "unsupported version " + std::to_string(*version));
  }

  if (root.contains("validation")) {
    const json& v = root["validation"];
    if (v == "strict") {
      cfg.validation = Validation::Strict;
    } else if (v == "probabilities_only") {
      cfg.validation = Validation::ProbabilitiesOnly;
    } else {
      invalid("validation", "expected \"strict\" or \"probabilities_only\"");
    }
  }

  if (root.contains("arm") == root.contains("arms")) {
    invalid("arms", "give exactly one of \"arm\" or \"arms\"");
  }
  if (root.contains("arm")) {
    cfg.arms.push_back(detail::parse_arm(root["arm"], "arm", cfg.validation));
  } else {
    const json& arms = root["arms"];
    if (!arms.is_array() || arms.empty()) invalid("arms", "expected a non-empty array");
    for (std::size_t i = 0; i < arms.size(); ++i) {
      cfg.arms.push_back(
          detail::parse_arm(arms[i], "arms[" + std::to_string(i) + "]", cfg.validation));
    }
  }

  if (auto b = detail::opt_number(root, "", "beta")) {
    if (!(*b > 0.0 && *b < 1.0)) invalid("beta", "must lie in (0,1)");
    cfg.beta = *b;
  }
  cfg.eta2 = detail::opt_number(root, "", "eta2");
  if (root.contains("eta2_list")) {
    const json& l = root["eta2_list"];
    if (!l.is_array()) invalid("eta2_list", "expected an array of numbers");
    for (std::size_t i = 0; i < l.size(); ++i) {
      if (!l[i].is_number()) invalid("eta2_list[" + std::to_string(i) + "]", "expected a number");
      cfg.eta2_list.push_back(l[i].get<double>());
    }
    if (!std::is_sorted(cfg.eta2_list.begin(), cfg.eta2_list.end())) {
      invalid("eta2_list", "values must be ascending");
    }
  }
  if (root.contains("eta2_sweep")) {
    const json& s = root["eta2_sweep"];
    detail::only_keys(s, "eta2_sweep", {"from", "to", "step"});
    Eta2Sweep sw;
    sw.from = detail::get_number(s, "eta2_sweep", "from");
    sw.to = detail::get_number(s, "eta2_sweep", "to");
    sw.step = detail::opt_number(s, "eta2_sweep", "step").value_or(0.01);
    if (!(sw.step > 0.0)) invalid("eta2_sweep.step", "must be positive");
    if (!(sw.to >= sw.from)) invalid("eta2_sweep.to", "must not be below from");
    cfg.eta2_sweep = sw;
  }
  if (auto g = detail::opt_count(root, "", "grid")) {
    if (*g < 3) invalid("grid", "needs at least 3 nodes");
    cfg.grid = *g;
  }
  auto positive = [&](const json& obj, const std::string& path, const char* key, double& out) {
    if (auto v = detail::opt_number(obj, path, key)) {
      if (!(*v > 0.0)) invalid(detail::join(path, key), "must be positive");
      out = *v;
    }
  };
  positive(root, "", "tol", cfg.tol);
  if (auto m = detail::opt_count(root, "", "max_sweeps")) {
    if (*m < 1) invalid("max_sweeps", "must be at least 1");
    cfg.max_sweeps = *m;
  }
  positive(root, "", "pi_tol", cfg.pi_tol);
  positive(root, "", "index_tol", cfg.index_tol);
  if (auto s = detail::opt_count(root, "", "seed")) cfg.seed = *s;

  if (root.contains("whittle")) {
    const json& w = root["whittle"];
    detail::only_keys(w, "whittle", {"points", "mode", "vi_grid", "verify", "scan_step"});
    if (auto p = detail::opt_count(w, "whittle", "points")) {
      if (*p < 2) invalid("whittle.points", "needs at least 2 points");
      cfg.whittle.points = *p;
    }
    if (w.contains("mode")) {
      if (w["mode"] == "scan") {
        cfg.whittle.mode = NumericMode::Scan;
      } else if (w["mode"] == "bisection") {
        cfg.whittle.mode = NumericMode::Bisection;
      } else {
        invalid("whittle.mode", "expected \"scan\" or \"bisection\"");
      }
    }
    if (auto g = detail::opt_count(w, "whittle", "vi_grid")) {
      if (*g < 3) invalid("whittle.vi_grid", "needs at least 3 nodes");
      cfg.whittle.vi_grid = *g;
    }
    if (w.contains("verify")) {
      if (!w["verify"].is_boolean()) invalid("whittle.verify", "expected true or false");
      cfg.whittle.verify = w["verify"].get<bool>();
    }
    positive(w, "whittle", "scan_step", cfg.whittle.scan_step);
  }

  if (root.contains("simulation")) {
    const json& s = root["simulation"];
    detail::only_keys(s, "simulation",
                      {"horizon", "iterations", "initial_beliefs", "policies", "average_from"});
    if (auto h = detail::opt_count(s, "simulation", "horizon")) {
      if (*h < 1) invalid("simulation.horizon", "must be at least 1");
      cfg.simulation.horizon = *h;
    }
    if (auto k = detail::opt_count(s, "simulation", "iterations")) {
      if (*k < 1) invalid("simulation.iterations", "must be at least 1");
      cfg.simulation.iterations = *k;
    }
    if (auto a = detail::opt_count(s, "simulation", "average_from")) cfg.simulation.average_from = *a;
    if (s.contains("initial_beliefs")) {
      const json& ib = s["initial_beliefs"];
      if (ib == "random") {
        cfg.simulation.initial_mode = InitialBeliefMode::Random;
      } else if (ib.is_array()) {
        cfg.simulation.initial_mode = InitialBeliefMode::Fixed;
        if (ib.size() != cfg.arms.size()) {
          invalid("simulation.initial_beliefs", "needs one belief per arm");
        }
        for (std::size_t i = 0; i < ib.size(); ++i) {
          const std::string p = "simulation.initial_beliefs[" + std::to_string(i) + "]";
          if (!ib[i].is_number()) invalid(p, "expected a number");
          const double pi = ib[i].get<double>();
          if (!(pi >= 0.0 && pi <= 1.0)) invalid(p, "belief must lie in [0,1]");
          cfg.simulation.initial_beliefs.push_back(pi);
        }
      } else {
        invalid("simulation.initial_beliefs", "expected \"random\" or an array of beliefs");
      }
    }
    if (s.contains("policies")) {
      const json& ps = s["policies"];
      if (!ps.is_array() || ps.empty()) invalid("simulation.policies", "expected a non-empty array");
      cfg.simulation.policies.clear();
      for (std::size_t i = 0; i < ps.size(); ++i) {
        if (!(ps[i] == "whittle" || ps[i] == "myopic" || ps[i] == "random")) {
          invalid("simulation.policies[" + std::to_string(i) + "]",
                  "expected \"whittle\", \"myopic\" or \"random\"");
        }
        cfg.simulation.policies.push_back(ps[i].get<std::string>());
      }
    }
  }

  if (root.contains("oracle")) {
    const json& o = root["oracle"];
    detail::only_keys(o, "oracle", {"horizon", "samples"});
    if (auto h = detail::opt_count(o, "oracle", "horizon")) {
      if (*h < 1 || *h > static_cast<std::uint64_t>(kMaxOracleHorizon)) {
        invalid("oracle.horizon", "must lie in 1.." + std::to_string(kMaxOracleHorizon));
      }
      cfg.oracle.horizon = static_cast<int>(*h);
    }
    if (auto n = detail::opt_count(o, "oracle", "samples")) {
      if (*n < 1) invalid("oracle.samples", "must be at least 1");
      cfg.oracle.samples = *n;
    }
  }
  return cfg;
}

inline RunConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::ParseError, "cannot read " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) {
    throw Error(Errc::ParseError, path + ": empty file");
  }
  return parse_config_text(text, path);
}

}  // namespace hmb
