#pragma once

// Discounted dynamic program of the single arm solved by value iteration on a
// belief grid with linear interpolation, plus an exact finite-horizon
// enumeration used as an independent check.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <sstream>
#include <utility>
#include <vector>

#include "hmbandit/arm_model.hpp"
#include "hmbandit/error.hpp"

namespace hmb {

class BeliefGrid {
 public:
  /// Linear interpolation stencil: value = (1 - weight) * v[lo] + weight * v[lo + 1].
  struct Stencil {
    std::size_t lo = 0;
    double weight = 0.0;
  };

  static BeliefGrid uniform(std::size_t n_points) {
    if (n_points < 3) {
      std::ostringstream os;
      os << "a belief grid needs at least 3 nodes, got " << n_points;
      throw Error(Errc::TooCoarse, os.str());
    }
    std::vector<double> nodes(n_points);
    const double last = static_cast<double>(n_points - 1);
    for (std::size_t i = 0; i < n_points; ++i) nodes[i] = static_cast<double>(i) / last;
    nodes.back() = 1.0;
    return BeliefGrid(std::move(nodes), true);
  }

  static BeliefGrid from_nodes(std::vector<double> nodes) {
    if (nodes.size() < 3) throw Error(Errc::TooCoarse, "a belief grid needs at least 3 nodes");
    if (nodes.front() != 0.0 || nodes.back() != 1.0) {
      throw Error(Errc::OutOfRange, "belief grid must start at 0 and end at 1");
    }
    for (std::size_t i = 1; i < nodes.size(); ++i) {
      if (!(nodes[i] > nodes[i - 1])) {
        throw Error(Errc::OutOfRange, "belief grid nodes must be strictly increasing");
      }
    }
    return BeliefGrid(std::move(nodes), false);
  }

  std::size_t size() const noexcept { return nodes_.size(); }
  double operator[](std::size_t i) const noexcept { return nodes_[i]; }
  std::span<const double> nodes() const noexcept { return nodes_; }
  bool is_uniform() const noexcept { return uniform_; }

  /// Largest distance between adjacent nodes.
  double spacing() const noexcept { return spacing_; }

  Stencil locate(double pi) const noexcept {
    const std::size_t n = nodes_.size();
    pi = std::clamp(pi, 0.0, 1.0);
    std::size_t lo;
    if (uniform_) {
      lo = std::min(static_cast<std::size_t>(pi * static_cast<double>(n - 1)), n - 2);
      if (pi < nodes_[lo] && lo > 0) --lo;
      if (pi >= nodes_[lo + 1] && lo + 2 < n) ++lo;
    } else {
      const auto it = std::upper_bound(nodes_.begin(), nodes_.end(), pi);
      lo = static_cast<std::size_t>(std::distance(nodes_.begin(), it));
      lo = lo == 0 ? 0 : std::min(lo - 1, n - 2);
    }
    const double w = (pi - nodes_[lo]) / (nodes_[lo + 1] - nodes_[lo]);
    return {lo, std::clamp(w, 0.0, 1.0)};
  }

  static double interpolate(std::span<const double> values, Stencil s) noexcept {
    return (1.0 - s.weight) * values[s.lo] + s.weight * values[s.lo + 1];
  }

  double interpolate(std::span<const double> values, double pi) const noexcept {
    return interpolate(values, locate(pi));
  }

 private:
  BeliefGrid(std::vector<double> nodes, bool uniform)
      : nodes_(std::move(nodes)), uniform_(uniform) {
    for (std::size_t i = 1; i < nodes_.size(); ++i) {
      spacing_ = std::max(spacing_, nodes_[i] - nodes_[i - 1]);
    }
  }

  std::vector<double> nodes_;
  bool uniform_ = false;
  double spacing_ = 0.0;
};

enum class ValueKind { V, VS, VNS };

/// Value functions sampled on a grid for one (eta2, beta) pair.
struct ValueTable {
  BeliefGrid grid;
  std::vector<double> v;
  std::vector<double> v_s;
  std::vector<double> v_ns;
  double eta2 = 0.0;
  double beta = 0.0;
  std::size_t iterations = 0;
  double residual = 0.0;
  double tol = 0.0;
  /// Sup-norm change of v in every sweep, in order.
  std::vector<double> sweep_residuals;

  std::span<const double> values(ValueKind which) const noexcept {
    switch (which) {
      case ValueKind::VS: return v_s;
      case ValueKind::VNS: return v_ns;
      case ValueKind::V: break;
    }
    return v;
  }

  double eval(double pi, ValueKind which = ValueKind::V) const {
    return grid.interpolate(values(which), checked_belief(pi));
  }
};

/// Zero-initialised table, the starting point of value iteration.
inline ValueTable zero_table(const BeliefGrid& grid, double eta2, Discount beta) {
  ValueTable t{grid, {}, {}, {}, eta2, beta.value(), 0, 0.0, 0.0, {}};
  t.v.assign(grid.size(), 0.0);
  t.v_s.assign(grid.size(), 0.0);
  t.v_ns.assign(grid.size(), 0.0);
  return t;
}

/// Bellman operator of the single-arm problem restricted to a grid. The
/// filter images of every node and their interpolation stencils do not
/// depend on (eta2, beta) and are computed once.
class BellmanOperator {
 public:
  BellmanOperator(const ArmParams& arm, BeliefGrid grid) : arm_(arm), grid_(std::move(grid)) {
    nodes_.reserve(grid_.size());
    for (double pi : grid_.nodes()) nodes_.push_back(make_node(pi));
  }

  const ArmParams& arm() const noexcept { return arm_; }
  const BeliefGrid& grid() const noexcept { return grid_; }

  /// One synchronous sweep. Writes the sampled and not-sampled values and
  /// their maximum; returns the sup-norm change from v to out.
  double sweep(std::span<const double> v, double eta2, double beta, std::span<double> v_s,
               std::span<double> v_ns, std::span<double> out) const noexcept {
    double change = 0.0;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      const Node& n = nodes_[i];
      const double s = n.reward + beta * (n.p1 * BeliefGrid::interpolate(v, n.after1) +
                                          (1.0 - n.p1) * BeliefGrid::interpolate(v, n.after0));
      const double ns = eta2 + beta * BeliefGrid::interpolate(v, n.after_passive);
      v_s[i] = s;
      v_ns[i] = ns;
      out[i] = std::max(s, ns);
      change = std::max(change, std::abs(out[i] - v[i]));
    }
    return change;
  }

  /// Sampled / not-sampled values at an arbitrary belief, one step ahead of
  /// the interpolated v.
  std::pair<double, double> lookahead(std::span<const double> v, double eta2, double beta,
                                      double pi) const {
    const Node n = make_node(checked_belief(pi));
    const double s = n.reward + beta * (n.p1 * BeliefGrid::interpolate(v, n.after1) +
                                        (1.0 - n.p1) * BeliefGrid::interpolate(v, n.after0));
    const double ns = eta2 + beta * BeliefGrid::interpolate(v, n.after_passive);
    return {s, ns};
  }

 private:
  struct Node {
    double reward;
    double p1;
    BeliefGrid::Stencil after1;
    BeliefGrid::Stencil after0;
    BeliefGrid::Stencil after_passive;
  };

  Node make_node(double pi) const {
    const double p1 = rho(arm_, pi);
    // A branch with zero probability never contributes; point it anywhere.
    const double g1 = p1 > 0.0 ? gamma1(arm_, pi) : pi;
    const double g0 = p1 < 1.0 ? gamma0(arm_, pi) : pi;
    return {expected_reward(arm_, pi), p1, grid_.locate(g1), grid_.locate(g0),
            grid_.locate(gamma2(arm_, pi))};
  }

  ArmParams arm_;
  BeliefGrid grid_;
  std::vector<Node> nodes_;
};

/// One synchronous Bellman sweep applied to a table.
inline ValueTable bellman_backup(const ValueTable& table, const ArmParams& arm) {
  const BellmanOperator op(arm, table.grid);
  ValueTable next = table;
  next.residual =
      op.sweep(table.v, table.eta2, table.beta, next.v_s, next.v_ns, next.v);
  next.iterations = table.iterations + 1;
  next.sweep_residuals.push_back(next.residual);
  return next;
}

struct SolveOptions {
  double tol = 1e-9;
  std::size_t max_sweeps = 1'000'000;
};

/// Iterates the Bellman operator from v = 0 until the sweep change is at most
/// tol (1 - beta) / (2 beta), which bounds the sup-norm distance to the grid
/// fixed point by tol.
inline ValueTable solve(const BellmanOperator& op, double eta2, Discount beta,
                        const SolveOptions& opts = {}) {
  if (!(opts.tol > 0.0)) throw Error(Errc::OutOfRange, "solve tolerance must be positive");
  const double b = beta.value();
  const double stop = opts.tol * (1.0 - b) / (2.0 * b);

  ValueTable t = zero_table(op.grid(), eta2, beta);
  t.tol = opts.tol;
  std::vector<double> next(t.v.size());
  for (std::size_t sweep = 1; sweep <= opts.max_sweeps; ++sweep) {
    const double change = op.sweep(t.v, eta2, b, t.v_s, t.v_ns, next);
    t.v.swap(next);
    t.iterations = sweep;
    t.residual = change;
    t.sweep_residuals.push_back(change);
    if (change <= stop) return t;
  }
  std::ostringstream os;
  os << "value iteration did not reach tol " << opts.tol << " within " << opts.max_sweeps
     << " sweeps";
  throw Error(Errc::IterationBudgetExceeded, os.str());
}

inline ValueTable solve(const ArmParams& arm, double eta2, Discount beta, const BeliefGrid& grid,
                        const SolveOptions& opts = {}) {
  return solve(BellmanOperator(arm, grid), eta2, beta, opts);
}

inline constexpr int kMaxOracleHorizon = 20;

namespace detail {

inline double tree_value(const ArmParams& arm, double eta2, double beta, double pi, int steps) {
  if (steps == 0) return 0.0;
  const double p1 = rho(arm, pi);
  double sampled = expected_reward(arm, pi);
  if (p1 > 0.0) sampled += beta * p1 * tree_value(arm, eta2, beta, gamma1(arm, pi), steps - 1);
  if (p1 < 1.0) {
    sampled += beta * (1.0 - p1) * tree_value(arm, eta2, beta, gamma0(arm, pi), steps - 1);
  }
  const double passive = eta2 + beta * tree_value(arm, eta2, beta, gamma2(arm, pi), steps - 1);
  return std::max(sampled, passive);
}

}  // namespace detail

/// Exact optimal value of the horizon-T problem by enumerating actions and
/// signals on continuous beliefs. No grid is involved.
inline double finite_horizon_oracle(const ArmParams& arm, double eta2, Discount beta, double pi,
                                    int horizon) {
  if (horizon < 1) throw Error(Errc::OutOfRange, "oracle horizon must be at least 1");
  if (horizon > kMaxOracleHorizon) {
    std::ostringstream os;
    os << "oracle horizon " << horizon << " exceeds " << kMaxOracleHorizon;
    throw Error(Errc::HorizonTooLarge, os.str());
  }
  return detail::tree_value(arm, eta2, beta.value(), checked_belief(pi), horizon);
}

/// Admissible gap between the grid solution and the horizon-T oracle:
/// truncation tail plus the Lipschitz interpolation allowance.
inline double oracle_tolerance(const ArmParams& arm, double eta2, Discount beta, int horizon,
                               double grid_spacing) {
  const double b = beta.value();
  const double reward_bound =
      std::max({std::abs(arm.eta0()), std::abs(arm.eta1()), std::abs(eta2)});
  return std::pow(b, horizon) * reward_bound / (1.0 - b) +
         kappa1(arm, beta) * std::abs(arm.rho1() - arm.rho0()) * grid_spacing;
}

struct ConvexityViolation {
  ValueKind which;
  std::size_t index;  // middle node of the offending triple
  double second_difference;
};

/// Grid triples whose (spacing-normalised) second difference falls below
/// -tol_convex for any of v, v_s, v_ns.
inline std::vector<ConvexityViolation> convexity_report(const ValueTable& table,
                                                        double tol_convex = 1e-8) {
  std::vector<ConvexityViolation> out;
  const auto x = table.grid.nodes();
  for (ValueKind which : {ValueKind::V, ValueKind::VS, ValueKind::VNS}) {
    const auto f = table.values(which);
    for (std::size_t i = 1; i + 1 < f.size(); ++i) {
      const double h1 = x[i] - x[i - 1];
      const double h2 = x[i + 1] - x[i];
      // Reduces to f[i-1] - 2 f[i] + f[i+1] on a uniform grid.
      const double d2 = (h2 * f[i - 1] - (h1 + h2) * f[i] + h1 * f[i + 1]) / (0.5 * (h1 + h2));
      if (d2 < -tol_convex) out.push_back({which, i, d2});
    }
  }
  return out;
}

}  // namespace hmb
