#pragma once

// Threshold structure of the optimal single-arm policy, indexability checks
// and the Whittle index (closed form where one exists, numeric otherwise).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <iterator>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "hmbandit/arm_model.hpp"
#include "hmbandit/error.hpp"
#include "hmbandit/value_iteration.hpp"

namespace hmb {

/// V_S(pi) - V_NS(pi) read off the stored tables by interpolation.
inline double sampling_advantage(const ValueTable& table, double pi) {
  return table.eval(pi, ValueKind::VS) - table.eval(pi, ValueKind::VNS);
}

/// Same quantity computed one Bellman step ahead of the interpolated value
/// function, so it is exact in pi for the given v rather than piecewise linear.
inline double lookahead_advantage(const BellmanOperator& op, const ValueTable& table, double pi) {
  const auto [s, ns] = op.lookahead(table.v, table.eta2, table.beta, pi);
  return s - ns;
}

enum class Regime { AlwaysSample, NeverSample, Threshold, ApproxThreshold };

constexpr std::string_view to_string(Regime r) {
  switch (r) {
    case Regime::AlwaysSample: return "AlwaysSample";
    case Regime::NeverSample: return "NeverSample";
    case Regime::Threshold: return "Threshold";
    case Regime::ApproxThreshold: return "ApproxThreshold";
  }
  return "?";
}

struct Hole {
  double center = 0.0;
  double radius = 0.0;
  double lo() const noexcept { return center - radius; }
  double hi() const noexcept { return center + radius; }
  bool contains(double pi, double slack = 0.0) const noexcept {
    return pi >= lo() - slack && pi <= hi() + slack;
  }
};

struct ThresholdResult {
  double eta2 = 0.0;
  double pi_t = 0.0;
  std::vector<double> crossings;
  std::optional<double> pi_circ;
  std::optional<Hole> hole;
  Regime regime = Regime::Threshold;
  /// Per grid node: true where not sampling is optimal.
  std::vector<bool> no_sample;
  std::size_t iterations = 0;
};

struct ThresholdOptions {
  SolveOptions solve;
  double pi_tol = 1e-6;
};

/// Belief at which rho(pi) equals the subsidy, if the subsidy lies in [rho0, rho1].
inline std::optional<double> neutral_belief(const ArmParams& arm, double eta2) {
  if (eta2 < arm.rho0() || eta2 > arm.rho1()) return std::nullopt;
  return (arm.rho1() - eta2) / (arm.rho1() - arm.rho0());
}

/// Sampling advantage at every grid node, one step ahead of table.v.
inline std::vector<double> advantage_at_nodes(const BellmanOperator& op, const ValueTable& table) {
  const std::size_t n = table.v.size();
  std::vector<double> s(n), ns(n), out(n);
  op.sweep(table.v, table.eta2, table.beta, s, ns, out);
  for (std::size_t i = 0; i < n; ++i) out[i] = s[i] - ns[i];
  return out;
}

/// Reads the policy structure off a solved table.
inline ThresholdResult threshold_from_table(const BellmanOperator& op, const ValueTable& table,
                                            const ArmParams& arm, double pi_tol = 1e-6) {
  const BeliefGrid& grid = table.grid;
  const std::vector<double> d = advantage_at_nodes(op, table);

  ThresholdResult r;
  r.eta2 = table.eta2;
  r.iterations = table.iterations;
  r.pi_circ = neutral_belief(arm, table.eta2);
  r.no_sample.resize(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) r.no_sample[i] = !(d[i] > 0.0);

  for (std::size_t i = 0; i + 1 < d.size(); ++i) {
    if (r.no_sample[i] == r.no_sample[i + 1]) continue;
    const bool left_samples = !r.no_sample[i];
    double lo = grid[i];
    double hi = grid[i + 1];
    while (hi - lo > pi_tol) {
      const double mid = 0.5 * (lo + hi);
      if ((lookahead_advantage(op, table, mid) > 0.0) == left_samples) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    r.crossings.push_back(0.5 * (lo + hi));
  }

  if (r.crossings.empty()) {
    r.regime = r.no_sample.front() ? Regime::NeverSample : Regime::AlwaysSample;
    r.pi_t = r.no_sample.front() ? 0.0 : 1.0;
    return r;
  }

  // Sampling on [0, first crossing] is the threshold part; everything after
  // the first crossing is an exception that has to fit in the hole.
  const bool samples_at_zero = !r.no_sample.front();
  r.pi_t = samples_at_zero ? r.crossings.front() : 0.0;
  const std::size_t first_extra = samples_at_zero ? 1 : 0;
  if (r.crossings.size() == first_extra) {
    r.regime = Regime::Threshold;
    return r;
  }
  r.regime = Regime::ApproxThreshold;
  const auto extra_lo = std::min_element(r.crossings.begin() + first_extra, r.crossings.end());
  const auto extra_hi = std::max_element(r.crossings.begin() + first_extra, r.crossings.end());
  Hole h;
  h.center = r.pi_circ.value_or(0.5 * (*extra_lo + *extra_hi));
  for (std::size_t k = first_extra; k < r.crossings.size(); ++k) {
    h.radius = std::max(h.radius, std::abs(r.crossings[k] - h.center));
  }
  r.hole = h;
  return r;
}

inline ThresholdResult threshold(const BellmanOperator& op, double eta2, Discount beta,
                                 const ThresholdOptions& opts = {}) {
  const ValueTable table = solve(op, eta2, beta, opts.solve);
  return threshold_from_table(op, table, op.arm(), opts.pi_tol);
}

inline ThresholdResult threshold(const ArmParams& arm, double eta2, Discount beta,
                                 const BeliefGrid& grid, const ThresholdOptions& opts = {}) {
  return threshold(BellmanOperator(arm, grid), eta2, beta, opts);
}

struct ThresholdCurve {
  BeliefGrid grid;
  double beta = 0.0;
  std::vector<ThresholdResult> points;
};

inline ThresholdCurve threshold_curve(const ArmParams& arm, const std::vector<double>& eta2_list,
                                      Discount beta, const BeliefGrid& grid,
                                      const ThresholdOptions& opts = {}) {
  if (!std::is_sorted(eta2_list.begin(), eta2_list.end())) {
    throw Error(Errc::OutOfRange, "threshold_curve needs eta2 values in ascending order");
  }
  const BellmanOperator op(arm, grid);
  ThresholdCurve curve{grid, beta.value(), {}};
  curve.points.reserve(eta2_list.size());
  for (double eta2 : eta2_list) curve.points.push_back(threshold(op, eta2, beta, opts));
  return curve;
}

/// Evenly spaced subsidies from lo to hi inclusive (hi is kept when it falls
/// within half a step of the ladder).
inline std::vector<double> eta2_ladder(double lo, double hi, double step) {
  if (!(step > 0.0) || !(hi >= lo)) throw Error(Errc::OutOfRange, "invalid eta2 ladder");
  const auto n = static_cast<std::size_t>(std::floor((hi - lo) / step + 0.5));
  std::vector<double> out(n + 1);
  for (std::size_t k = 0; k <= n; ++k) out[k] = lo + static_cast<double>(k) * step;
  return out;
}

// ---------------------------------------------------------------------------
// Indexability

enum class Trend { Constant, NonIncreasing, NonDecreasing, Mixed };

constexpr std::string_view to_string(Trend t) {
  switch (t) {
    case Trend::Constant: return "constant";
    case Trend::NonIncreasing: return "non-increasing";
    case Trend::NonDecreasing: return "non-decreasing";
    case Trend::Mixed: return "mixed";
  }
  return "?";
}

/// pi_T grew from eta2_a to the larger eta2_b.
struct ThresholdViolation {
  double eta2_a = 0.0;
  double eta2_b = 0.0;
  double pi_t_a = 0.0;
  double pi_t_b = 0.0;
  bool inside_hole = false;
};

/// A run of grid nodes that is in the no-sample set at eta2_a but not at eta2_b.
struct InclusionViolation {
  double eta2_a = 0.0;
  double eta2_b = 0.0;
  double pi_lo = 0.0;
  double pi_hi = 0.0;
  bool inside_hole = false;
};

struct IndexabilityReport {
  Trend pi_t_trend = Trend::Constant;
  std::vector<ThresholdViolation> threshold_violations;
  std::vector<InclusionViolation> inclusion_violations;
  /// No violation of either kind.
  bool indexable = true;
  /// Every violation lies inside a reported hole.
  bool epsilon_indexable = true;
  /// Largest hole radius needed to cover the violations.
  double epsilon = 0.0;
};

namespace detail {

inline std::optional<double> covering_radius(const ThresholdResult& a, const ThresholdResult& b,
                                             double lo, double hi, double slack) {
  std::optional<double> best;
  for (const auto* r : {&a, &b}) {
    if (r->hole && r->hole->contains(lo, slack) && r->hole->contains(hi, slack)) {
      best = std::min(best.value_or(r->hole->radius), r->hole->radius);
    }
  }
  return best;
}

}  // namespace detail

/// Checks that the no-sample set only grows along an ascending subsidy curve:
/// pi_T must not increase, and no node may leave the no-sample set.
inline IndexabilityReport indexability_check(const ThresholdCurve& curve, double pi_tol = 1e-5) {
  IndexabilityReport rep;
  const auto& pts = curve.points;
  const auto nodes = curve.grid.nodes();
  const double slack = curve.grid.spacing();
  bool went_up = false;
  bool went_down = false;

  auto record = [&](bool inside, std::optional<double> radius) {
    rep.indexable = false;
    if (inside) {
      rep.epsilon = std::max(rep.epsilon, *radius);
    } else {
      rep.epsilon_indexable = false;
    }
  };

  for (std::size_t k = 0; k + 1 < pts.size(); ++k) {
    const ThresholdResult& a = pts[k];
    const ThresholdResult& b = pts[k + 1];
    const double diff = b.pi_t - a.pi_t;
    if (diff > pi_tol) went_up = true;
    if (diff < -pi_tol) went_down = true;
    if (diff > pi_tol) {
      const auto radius = detail::covering_radius(a, b, a.pi_t, b.pi_t, slack);
      rep.threshold_violations.push_back({a.eta2, b.eta2, a.pi_t, b.pi_t, radius.has_value()});
      record(radius.has_value(), radius);
    }

    if (a.no_sample.size() != nodes.size() || b.no_sample.size() != nodes.size()) continue;
    std::size_t i = 0;
    while (i < nodes.size()) {
      if (!(a.no_sample[i] && !b.no_sample[i])) {
        ++i;
        continue;
      }
      std::size_t j = i;
      while (j + 1 < nodes.size() && a.no_sample[j + 1] && !b.no_sample[j + 1]) ++j;
      const auto radius = detail::covering_radius(a, b, nodes[i], nodes[j], slack);
      rep.inclusion_violations.push_back({a.eta2, b.eta2, nodes[i], nodes[j], radius.has_value()});
      record(radius.has_value(), radius);
      i = j + 1;
    }
  }
  if (went_up && went_down) {
    rep.pi_t_trend = Trend::Mixed;
  } else if (went_up) {
    rep.pi_t_trend = Trend::NonDecreasing;
  } else if (went_down) {
    rep.pi_t_trend = Trend::NonIncreasing;
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Whittle index

struct WhittleOptions {
  SolveOptions solve;
  /// Search interval for the subsidy; defaults to [rho0 - 1, rho1 + 1].
  std::optional<std::pair<double, double>> bracket;
  double scan_step = 0.01;
  double bracket_expansion = 2.0;
  double eta_tol = 1e-9;
  double index_tol = 1e-6;
};

struct WhittleEstimate {
  double w = 0.0;
  /// |V_S - V_NS| at pi after re-solving with subsidy w.
  double residual = 0.0;
  std::size_t solves = 0;
};

namespace detail {

inline double advantage_for(const BellmanOperator& op, double eta2, Discount beta, double pi,
                            const SolveOptions& opts, std::size_t& solves) {
  ++solves;
  const ValueTable t = solve(op, eta2, beta, opts);
  return lookahead_advantage(op, t, pi);
}

}  // namespace detail

/// Smallest subsidy at which not sampling becomes optimal at pi: ascending
/// scan for the first sign change of the advantage, then bisection.
inline WhittleEstimate whittle_estimate(const BellmanOperator& op, double pi, Discount beta,
                                        const WhittleOptions& opts = {}) {
  checked_belief(pi);
  const ArmParams& arm = op.arm();
  auto [lo, hi] = opts.bracket.value_or(std::pair{arm.rho0() - 1.0, arm.rho1() + 1.0});
  if (!(hi > lo)) throw Error(Errc::OutOfRange, "empty subsidy bracket");
  std::size_t solves = 0;
  auto adv = [&](double eta2) {
    return detail::advantage_for(op, eta2, beta, pi, opts.solve, solves);
  };

  if (!(adv(lo) > 0.0)) {
    lo -= opts.bracket_expansion;
    if (!(adv(lo) > 0.0)) {
      std::ostringstream os;
      os << "not sampling is already optimal at pi = " << pi << " for subsidy " << lo;
      throw Error(Errc::NoCrossingInBracket, os.str());
    }
  }

  std::optional<std::pair<double, double>> found;
  double prev = lo;
  double limit = hi;
  for (int pass = 0; pass < 2 && !found; ++pass) {
    for (double eta2 = prev + opts.scan_step;; eta2 += opts.scan_step) {
      const double e = std::min(eta2, limit);
      if (!(adv(e) > 0.0)) {
        found = std::pair{prev, e};
        break;
      }
      prev = e;
      if (e >= limit) break;
    }
    limit = hi + opts.bracket_expansion;
  }
  if (!found) {
    std::ostringstream os;
    os << "sampling stays optimal at pi = " << pi << " up to subsidy " << limit;
    throw Error(Errc::NoCrossingInBracket, os.str());
  }

  auto [a, b] = *found;
  while (b - a > opts.eta_tol) {
    const double mid = 0.5 * (a + b);
    if (adv(mid) > 0.0) {
      a = mid;
    } else {
      b = mid;
    }
  }
  WhittleEstimate out;
  out.w = 0.5 * (a + b);
  out.residual = std::abs(adv(out.w));
  out.solves = solves;
  return out;
}

inline double whittle_numeric(const ArmParams& arm, double pi, Discount beta,
                              const BeliefGrid& grid, const WhittleOptions& opts = {}) {
  return whittle_estimate(BellmanOperator(arm, grid), pi, beta, opts).w;
}

inline constexpr int kTauBudget = 10000;

struct ClosedFormIndex {
  double w = 0.0;
  Region region = Region::A1;
};

namespace detail {

// Index on the part of A2 where the signal-1 orbit starts below pi. The orbit
// x_l = gamma1^l(pi) with p_l = rho(x_l) is followed until it first returns to
// [pi, 1] (the return time tau) or its weight becomes negligible.
inline double orbit_index(const ArmParams& arm, double pi, double beta) {
  double c1 = 0.0;
  double c2 = 0.0;
  double c3 = 0.0;
  double x = pi;
  double weight = 1.0;  // beta^l * prod_{j<l} p_j
  const double p0 = rho(arm, pi);
  for (int l = 0;; ++l) {
    if (l > kTauBudget) {
      throw Error(Errc::NonTerminatingTau, "signal-1 orbit return time exceeds its budget");
    }
    const double p = rho(arm, x);
    c1 += weight * p;
    if (l >= 1) c3 += weight * beta * (1.0 - p);
    const double next = gamma1(arm, x);
    if (next >= pi) {
      c2 = weight * beta * p;
      break;
    }
    weight *= beta * p;
    x = next;
    if (weight < 1e-17 * c1) break;  // return time is effectively infinite
  }
  const double c4 = beta * (1.0 - p0);
  return (1.0 - beta) * c1 / (1.0 - (c2 + c3 + c4));
}

}  // namespace detail

/// Closed-form Whittle index on the regions where one is known; nullopt on
/// A2d and A3.
inline std::optional<ClosedFormIndex> whittle_closed_form(const ArmParams& arm,
                                                          const RegionBounds& bounds, double pi,
                                                          Discount discount) {
  const double beta = discount.value();
  const Region region = classify_region(arm, bounds, pi);
  const double m = (arm.rho0() - arm.rho1()) / (1.0 - beta * (arm.mu0() - arm.mu1()));
  switch (region) {
    case Region::A1:
    case Region::A2a:
      return ClosedFormIndex{rho(arm, pi), region};
    case Region::A2b:
    case Region::A2c:
      return ClosedFormIndex{detail::orbit_index(arm, pi, beta), region};
    case Region::A4:
      return ClosedFormIndex{rho(arm, pi) + beta * gamma2(arm, pi) * (m - 1.0), region};
    case Region::A5: {
      const double c = (arm.rho1() + beta * arm.mu1() * m) / (1.0 - beta);
      const double w = m * pi * (1.0 - beta * (arm.lambda0() - arm.lambda1())) +
                       (1.0 - beta) * c - beta * arm.lambda1() * m;
      return ClosedFormIndex{w, region};
    }
    case Region::A2d:
    case Region::A3:
      break;
  }
  return std::nullopt;
}

inline std::optional<ClosedFormIndex> whittle_closed_form(const ArmParams& arm, double pi,
                                                          Discount beta) {
  return whittle_closed_form(arm, region_bounds(arm), pi, beta);
}

// ---------------------------------------------------------------------------
// Whittle tables

enum class MethodKind { ClosedForm, Bisection, ValueIterationScan };

struct WhittleMethod {
  MethodKind kind = MethodKind::Bisection;
  std::optional<Region> region;  // set for ClosedForm

  std::string str() const {
    switch (kind) {
      case MethodKind::ClosedForm: return "ClosedForm(" + std::string(to_string(*region)) + ")";
      case MethodKind::Bisection: return "Bisection";
      case MethodKind::ValueIterationScan: return "ValueIterationScan";
    }
    return "?";
  }
};

struct WhittleEntry {
  double pi = 0.0;
  double w = 0.0;
  WhittleMethod method;
  /// |V_S - V_NS| at pi when re-solved with subsidy w; NaN if not checked.
  double residual = std::numeric_limits<double>::quiet_NaN();
};

/// A closed-form value that failed its numeric cross-check and was replaced.
struct WhittleDiscrepancy {
  double pi = 0.0;
  Region region = Region::A1;
  double closed_form = 0.0;
  double numeric = 0.0;
};

struct WhittleTable {
  ArmParams arm;
  double beta = 0.0;
  std::vector<WhittleEntry> entries;
  std::vector<WhittleDiscrepancy> discrepancies;

  /// Index at an arbitrary belief by linear interpolation between entries.
  double index(double pi) const {
    checked_belief(pi);
    if (entries.empty()) throw Error(Errc::MissingIndexTable, "Whittle table has no entries");
    const auto it = std::lower_bound(entries.begin(), entries.end(), pi,
                                     [](const WhittleEntry& e, double x) { return e.pi < x; });
    if (it == entries.begin()) return it->w;
    if (it == entries.end()) return entries.back().w;
    const auto prev = std::prev(it);
    const double t = (pi - prev->pi) / (it->pi - prev->pi);
    return (1.0 - t) * prev->w + t * it->w;
  }
};

enum class NumericMode { Bisection, Scan };

struct WhittleTableOptions {
  NumericMode mode = NumericMode::Bisection;
  WhittleOptions numeric;
  /// Value-iteration grid used for every numeric solve.
  std::size_t vi_grid_points = 2001;
  /// Use the closed form where the region admits one.
  bool closed_form = true;
  /// Re-solve at every entry's w and record |V_S - V_NS|.
  bool verify = false;
  /// Subsidy ladder for Scan mode: [rho0 - margin, rho1 + margin] in steps.
  double scan_step = 0.005;
  double scan_margin = 0.1;
  /// Illinois steps (one solve each) applied to every bracketed scan estimate.
  int scan_refine_steps = 2;
  /// Closed-form values further than this from the scan estimate are rejected.
  double scan_agreement_tol = 1e-3;
};

namespace detail {

// For each belief, the subsidy where the advantage first turns non-positive
// along an ascending ladder. The root is placed by a quadratic through the
// last three rungs, then tightened with Illinois steps (one solve each).
inline std::vector<std::optional<double>> scan_ladder(const BellmanOperator& op,
                                                      const std::vector<double>& pis,
                                                      Discount beta,
                                                      const std::vector<double>& ladder,
                                                      const SolveOptions& opts,
                                                      int refine_steps = 0) {
  struct Bracket {
    double lo, hi, d_lo, d_hi;
    std::optional<std::pair<double, double>> before;  // rung below lo and its advantage
  };
  std::vector<std::optional<double>> out(pis.size());
  std::vector<std::optional<Bracket>> brackets(pis.size());
  std::vector<double> prev_d(pis.size()), prev2_d(pis.size());
  std::vector<bool> open(pis.size(), true);
  for (std::size_t k = 0; k < ladder.size(); ++k) {
    const ValueTable t = solve(op, ladder[k], beta, opts);
    bool any_open = false;
    for (std::size_t i = 0; i < pis.size(); ++i) {
      if (!open[i]) continue;
      const double d = lookahead_advantage(op, t, pis[i]);
      if (!(d > 0.0)) {
        open[i] = false;
        if (k > 0) {
          Bracket br{ladder[k - 1], ladder[k], prev_d[i], d, std::nullopt};
          if (k > 1) br.before = std::pair{ladder[k - 2], prev2_d[i]};
          brackets[i] = br;
        }
      } else {
        prev2_d[i] = prev_d[i];
        prev_d[i] = d;
        any_open = true;
      }
    }
    if (!any_open) break;
  }

  auto secant = [](const Bracket& b) { return b.lo + b.d_lo / (b.d_lo - b.d_hi) * (b.hi - b.lo); };
  auto quadratic = [&](const Bracket& b) {
    if (!b.before) return secant(b);
    // Newton form through (x0, d0), (lo, d_lo), (hi, d_hi).
    const auto [x0, d0] = *b.before;
    const double f01 = (b.d_lo - d0) / (b.lo - x0);
    const double f12 = (b.d_hi - b.d_lo) / (b.hi - b.lo);
    const double c2 = (f12 - f01) / (b.hi - x0);
    // d(x) = d_lo + f12 (x - lo) + c2 (x - lo)(x - hi), solved for the root in [lo, hi].
    const double qa = c2;
    const double qb = f12 - c2 * (b.hi - b.lo);
    const double qc = b.d_lo;
    if (std::abs(qa) < 1e-14 * std::abs(qb)) return secant(b);
    const double disc = qb * qb - 4.0 * qa * qc;
    if (disc < 0.0) return secant(b);
    const double sq = std::sqrt(disc);
    const double q = -0.5 * (qb + std::copysign(sq, qb));
    for (double r : {q / qa, qc / q}) {
      if (r >= 0.0 && r <= b.hi - b.lo) return b.lo + r;
    }
    return secant(b);
  };

  for (std::size_t i = 0; i < pis.size(); ++i) {
    if (!brackets[i]) continue;
    Bracket b = *brackets[i];
    double x = quadratic(b);
    int side = 0;
    for (int s = 0; s < refine_steps && b.d_hi < 0.0; ++s) {
      const double d = lookahead_advantage(op, solve(op, x, beta, opts), pis[i]);
      if (d == 0.0) break;
      if (d > 0.0) {
        b.lo = x;
        b.d_lo = d;
        if (side == 1) b.d_hi *= 0.5;
        side = 1;
      } else {
        b.hi = x;
        b.d_hi = d;
        if (side == -1) b.d_lo *= 0.5;
        side = -1;
      }
      x = secant(b);
    }
    out[i] = x;
  }
  return out;
}

}  // namespace detail

/// Whittle index at each belief in pis (ascending). Closed-form values are
/// always cross-checked numerically; on disagreement the numeric value is
/// used and the pair is recorded as a discrepancy.
inline WhittleTable whittle_table(const ArmParams& arm, Discount beta,
                                  const std::vector<double>& pis,
                                  const WhittleTableOptions& opts = {}) {
  if (!std::is_sorted(pis.begin(), pis.end())) {
    throw Error(Errc::OutOfRange, "whittle_table needs beliefs in ascending order");
  }
  for (double pi : pis) checked_belief(pi);
  const BellmanOperator op(arm, BeliefGrid::uniform(opts.vi_grid_points));
  const double index_tol = opts.numeric.index_tol;

  WhittleTable table{arm, beta.value(), {}, {}};
  table.entries.resize(pis.size());

  std::optional<RegionBounds> bounds;
  if (opts.closed_form && supports_regions(arm)) {
    try {
      bounds = region_bounds(arm);
    } catch (const Error&) {
      bounds.reset();
    }
  }

  std::vector<std::optional<double>> scanned;
  if (opts.mode == NumericMode::Scan) {
    const auto ladder = eta2_ladder(arm.rho0() - opts.scan_margin, arm.rho1() + opts.scan_margin,
                                    opts.scan_step);
    scanned = detail::scan_ladder(op, pis, beta, ladder, opts.numeric.solve,
                                  opts.scan_refine_steps);
  }

  auto residual_at = [&](double pi, double w) {
    const ValueTable t = solve(op, w, beta, opts.numeric.solve);
    return std::abs(lookahead_advantage(op, t, pi));
  };

  for (std::size_t i = 0; i < pis.size(); ++i) {
    const double pi = pis[i];
    WhittleEntry& e = table.entries[i];
    e.pi = pi;

    std::optional<ClosedFormIndex> cf;
    if (bounds) cf = whittle_closed_form(arm, *bounds, pi, beta);

    std::optional<WhittleEstimate> numeric;
    auto bisect = [&]() -> const WhittleEstimate& {
      if (!numeric) numeric = whittle_estimate(op, pi, beta, opts.numeric);
      return *numeric;
    };

    if (cf) {
      bool accepted = false;
      double reference = 0.0;
      if (opts.mode == NumericMode::Scan && scanned[i]) {
        reference = *scanned[i];
        accepted = std::abs(cf->w - reference) <= opts.scan_agreement_tol;
        if (accepted && opts.verify) e.residual = residual_at(pi, cf->w);
      } else {
        e.residual = residual_at(pi, cf->w);
        accepted = e.residual <= index_tol;
        if (!accepted) reference = bisect().w;
      }
      if (accepted) {
        e.w = cf->w;
        e.method = {MethodKind::ClosedForm, cf->region};
        continue;
      }
      table.discrepancies.push_back({pi, cf->region, cf->w, reference});
    }

    if (opts.mode == NumericMode::Scan && scanned[i]) {
      e.w = *scanned[i];
      e.method = {MethodKind::ValueIterationScan, std::nullopt};
      e.residual = opts.verify ? residual_at(pi, e.w) : std::numeric_limits<double>::quiet_NaN();
    } else {
      const WhittleEstimate& est = bisect();
      e.w = est.w;
      e.method = {MethodKind::Bisection, std::nullopt};
      e.residual = est.residual;
    }
  }
  return table;
}

}  // namespace hmb
