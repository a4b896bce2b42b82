#pragma once

// CSV and JSON output. Numbers are written with 17 significant digits so
// that every value re-parses to the same double.

#include <cmath>
#include <cstdio>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hmbandit/arm_model.hpp"
#include "hmbandit/error.hpp"
#include "hmbandit/index.hpp"
#include "hmbandit/simulator.hpp"
#include "hmbandit/value_iteration.hpp"

namespace hmb {

inline std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::string fmt(const std::optional<double>& x) { return x ? fmt(*x) : std::string(); }

inline void write_value_table_csv(std::ostream& os, const ValueTable& t) {
  os << "pi,v,v_s,v_ns\n";
  for (std::size_t i = 0; i < t.v.size(); ++i) {
    os << fmt(t.grid[i]) << ',' << fmt(t.v[i]) << ',' << fmt(t.v_s[i]) << ',' << fmt(t.v_ns[i])
       << '\n';
  }
}

inline void write_threshold_csv(std::ostream& os, const std::vector<ThresholdResult>& points) {
  os << "eta2,pi_t,regime,crossings,pi_circ,hole_center,hole_radius\n";
  for (const ThresholdResult& r : points) {
    os << fmt(r.eta2) << ',' << fmt(r.pi_t) << ',' << to_string(r.regime) << ','
       << r.crossings.size() << ',' << fmt(r.pi_circ) << ','
       << (r.hole ? fmt(r.hole->center) : "") << ',' << (r.hole ? fmt(r.hole->radius) : "")
       << '\n';
  }
}

inline void write_whittle_csv(std::ostream& os, const WhittleTable& t) {
  os << "pi,w,method,residual\n";
  for (const WhittleEntry& e : t.entries) {
    os << fmt(e.pi) << ',' << fmt(e.w) << ',' << e.method.str() << ','
       << (std::isnan(e.residual) ? std::string() : fmt(e.residual)) << '\n';
  }
}

inline void write_sim_csv(std::ostream& os, const SimStats& s) {
  os << "slot,policy,mean_instantaneous_reward\n";
  for (const PolicyStats& p : s.policies) {
    for (std::size_t t = 0; t < p.mean_reward.size(); ++t) {
      os << t << ',' << p.name << ',' << fmt(p.mean_reward[t]) << '\n';
    }
  }
}

inline void write_trace_csv(std::ostream& os, const EpisodeTrace& tr) {
  os << "slot,chosen,signal,reward,discounted_cumulative\n";
  for (std::size_t t = 0; t < tr.chosen.size(); ++t) {
    os << t << ',' << tr.chosen[t] << ',' << tr.signal[t] << ',' << fmt(tr.reward[t]) << ','
       << fmt(tr.discounted_cumulative[t]) << '\n';
  }
}

struct CsvDocument {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    throw Error(Errc::ParseError, "no CSV column named " + name);
  }
  double number(std::size_t row, const std::string& name) const {
    return std::stod(rows.at(row).at(column(name)));
  }
};

/// Reader for the simple CSV written above (no quoting).
inline CsvDocument read_csv(std::istream& is) {
  auto split = [](const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
  };
  CsvDocument doc;
  std::string line;
  if (!std::getline(is, line)) throw Error(Errc::ParseError, "empty CSV");
  doc.header = split(line);
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    auto row = split(line);
    if (row.size() != doc.header.size()) throw Error(Errc::ParseError, "ragged CSV row: " + line);
    doc.rows.push_back(std::move(row));
  }
  return doc;
}

// ---------------------------------------------------------------------------
// JSON summaries

inline nlohmann::ordered_json to_json(const ArmParams& a) {
  return {{"lambda0", a.lambda0()}, {"lambda1", a.lambda1()}, {"mu0", a.mu0()},
          {"mu1", a.mu1()},         {"rho0", a.rho0()},       {"rho1", a.rho1()},
          {"eta0", a.eta0()},       {"eta1", a.eta1()},       {"eta2", a.eta2()},
          {"rewards_tied", a.rewards_tied()}};
}

inline nlohmann::ordered_json to_json(const ThresholdResult& r) {
  nlohmann::ordered_json j;
  j["eta2"] = r.eta2;
  j["pi_t"] = r.pi_t;
  j["regime"] = to_string(r.regime);
  j["crossings"] = r.crossings;
  j["pi_circ"] = r.pi_circ ? nlohmann::ordered_json(*r.pi_circ) : nlohmann::ordered_json();
  if (r.hole) {
    j["hole"] = {{"center", r.hole->center}, {"radius", r.hole->radius}};
  } else {
    j["hole"] = nullptr;
  }
  j["iterations"] = r.iterations;
  return j;
}

inline nlohmann::ordered_json to_json(const IndexabilityReport& rep) {
  nlohmann::ordered_json j;
  j["pi_t_trend"] = to_string(rep.pi_t_trend);
  j["indexable"] = rep.indexable;
  j["epsilon_indexable"] = rep.epsilon_indexable;
  j["epsilon"] = rep.epsilon;
  auto& tv = j["threshold_violations"] = nlohmann::ordered_json::array();
  for (const auto& v : rep.threshold_violations) {
    tv.push_back({{"eta2_a", v.eta2_a},
                  {"eta2_b", v.eta2_b},
                  {"pi_t_a", v.pi_t_a},
                  {"pi_t_b", v.pi_t_b},
                  {"inside_hole", v.inside_hole}});
  }
  auto& iv = j["inclusion_violations"] = nlohmann::ordered_json::array();
  for (const auto& v : rep.inclusion_violations) {
    iv.push_back({{"eta2_a", v.eta2_a},
                  {"eta2_b", v.eta2_b},
                  {"pi_lo", v.pi_lo},
                  {"pi_hi", v.pi_hi},
                  {"inside_hole", v.inside_hole}});
  }
  return j;
}

inline nlohmann::ordered_json to_json(const WhittleDiscrepancy& d) {
  return {{"pi", d.pi},
          {"region", to_string(d.region)},
          {"closed_form", d.closed_form},
          {"numeric", d.numeric}};
}

}  // namespace hmb
