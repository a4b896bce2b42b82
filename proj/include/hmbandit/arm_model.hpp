#pragma once

// Single-arm model of the two-state hidden Markov bandit: parameters, the
// Bayes belief filter, fixed points of the filter maps and the parameter
// classifiers used by the index computations.

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <string_view>

#include "hmbandit/error.hpp"

namespace hmb {

/// Unvalidated parameter record. Probabilities follow the convention that
/// state 0 is the "bad" state: lambda_i / mu_i are P(next state = 0 | state i)
/// without / with sampling, rho_i = P(signal = 1 | state i).
struct RawArm {
  double lambda0 = 0.0;
  double lambda1 = 0.0;
  double mu0 = 0.0;
  double mu1 = 0.0;
  double rho0 = 0.0;
  double rho1 = 0.0;
  double eta0 = 0.0;
  double eta1 = 0.0;
  double eta2 = 0.0;  // passive (no-sample) reward
};

/// Strict enforces rho0 < rho1 and eta0 < eta1 on top of the probability
/// ranges. ProbabilitiesOnly admits degenerate arms for simulation fixtures.
enum class Validation { Strict, ProbabilitiesOnly };

class Discount {
 public:
  explicit Discount(double beta) : beta_(beta) {
    if (!(beta > 0.0 && beta < 1.0)) {
      std::ostringstream os;
      os << "discount factor must lie in (0,1), got " << beta;
      throw Error(Errc::OutOfRange, os.str());
    }
  }
  double value() const noexcept { return beta_; }

 private:
  double beta_;
};

inline double checked_belief(double pi) {
  if (!(pi >= 0.0 && pi <= 1.0)) {
    std::ostringstream os;
    os << "belief must lie in [0,1], got " << pi;
    throw Error(Errc::OutOfRange, os.str());
  }
  return pi;
}

class ArmParams {
 public:
  static ArmParams validate(const RawArm& raw, Validation mode = Validation::Strict) {
    auto check_prob = [](double p, const char* name) {
      if (!(p >= 0.0 && p <= 1.0)) {
        std::ostringstream os;
        os << name << " = " << p << " is not a probability";
        throw Error(Errc::OutOfRange, os.str());
      }
    };
    check_prob(raw.lambda0, "lambda0");
    check_prob(raw.lambda1, "lambda1");
    check_prob(raw.mu0, "mu0");
    check_prob(raw.mu1, "mu1");
    check_prob(raw.rho0, "rho0");
    check_prob(raw.rho1, "rho1");
    for (double r : {raw.eta0, raw.eta1, raw.eta2}) {
      if (!std::isfinite(r)) throw Error(Errc::OutOfRange, "rewards must be finite");
    }
    if (mode == Validation::Strict) {
      if (!(raw.rho0 < raw.rho1)) {
        throw Error(Errc::OrderViolation, "rho0 must be strictly less than rho1");
      }
      if (!(raw.eta0 < raw.eta1)) {
        throw Error(Errc::OrderViolation, "eta0 must be strictly less than eta1");
      }
    }
    return ArmParams(raw);
  }

  double lambda0() const noexcept { return p_.lambda0; }
  double lambda1() const noexcept { return p_.lambda1; }
  double mu0() const noexcept { return p_.mu0; }
  double mu1() const noexcept { return p_.mu1; }
  double rho0() const noexcept { return p_.rho0; }
  double rho1() const noexcept { return p_.rho1; }
  double eta0() const noexcept { return p_.eta0; }
  double eta1() const noexcept { return p_.eta1; }
  double eta2() const noexcept { return p_.eta2; }

  /// eta0 == rho0 and eta1 == rho1: the sampling reward is the signal
  /// probability. Closed-form index computations require it.
  bool rewards_tied() const noexcept { return tied_; }

  const RawArm& raw() const noexcept { return p_; }

 private:
  explicit ArmParams(const RawArm& raw)
      : p_(raw), tied_(raw.eta0 == raw.rho0 && raw.eta1 == raw.rho1) {}

  RawArm p_;
  bool tied_;
};

/// Probability of observing signal 1 when sampling at belief pi.
inline double rho(const ArmParams& arm, double pi) {
  return pi * arm.rho0() + (1.0 - pi) * arm.rho1();
}

/// One-slot expected reward from sampling; equals rho(pi) for tied rewards.
inline double expected_reward(const ArmParams& arm, double pi) {
  return pi * arm.eta0() + (1.0 - pi) * arm.eta1();
}

inline constexpr double kDenominatorFloor = 1e-300;

namespace detail {

inline double bayes_update(double pi, double a0, double a1, double mu0, double mu1,
                           const char* which) {
  const double den = pi * a0 + (1.0 - pi) * a1;
  if (den < kDenominatorFloor) {
    std::ostringstream os;
    os << which << " has zero observation probability at pi = " << pi;
    throw Error(Errc::DegenerateObservation, os.str());
  }
  const double next = (pi * a0 * mu0 + (1.0 - pi) * a1 * mu1) / den;
  return std::clamp(next, 0.0, 1.0);
}

}  // namespace detail

/// Posterior after sampling and observing signal 0.
inline double gamma0(const ArmParams& arm, double pi) {
  return detail::bayes_update(pi, 1.0 - arm.rho0(), 1.0 - arm.rho1(), arm.mu0(), arm.mu1(),
                              "gamma0");
}

/// Posterior after sampling and observing signal 1.
inline double gamma1(const ArmParams& arm, double pi) {
  return detail::bayes_update(pi, arm.rho0(), arm.rho1(), arm.mu0(), arm.mu1(), "gamma1");
}

/// Prior propagation when the arm is not sampled.
inline double gamma2(const ArmParams& arm, double pi) {
  return pi * arm.lambda0() + (1.0 - pi) * arm.lambda1();
}

enum class BeliefMap { Gamma0, Gamma1, Gamma2 };

inline double apply(const ArmParams& arm, BeliefMap map, double pi) {
  switch (map) {
    case BeliefMap::Gamma0: return gamma0(arm, pi);
    case BeliefMap::Gamma1: return gamma1(arm, pi);
    case BeliefMap::Gamma2: return gamma2(arm, pi);
  }
  return pi;
}

/// k-fold composition of a belief map.
inline double iterate(const ArmParams& arm, BeliefMap map, double pi, int times) {
  for (int k = 0; k < times; ++k) pi = apply(arm, map, pi);
  return pi;
}

inline constexpr double kFixedPointResidual = 1e-10;
inline constexpr int kFixedPointIterations = 100000;
inline constexpr double kFixedPointIterationTol = 1e-12;

namespace detail {

inline double iterate_to_fixed_point(const ArmParams& arm, BeliefMap map, double start) {
  double x = start;
  for (int k = 0; k < kFixedPointIterations; ++k) {
    const double next = apply(arm, map, x);
    if (std::abs(next - x) <= kFixedPointIterationTol) return next;
    x = next;
  }
  throw Error(Errc::NoConvergence, "fixed-point iteration exceeded its budget");
}

// Root of a*x^2 + b*x + c in [lo, hi] (with a little slack), stable form.
inline double quadratic_root_in(double a, double b, double c, double lo, double hi) {
  constexpr double slack = 1e-12;
  auto inside = [&](double x) { return x >= lo - slack && x <= hi + slack; };
  if (std::abs(a) < 1e-15) {
    const double x = -c / b;
    return std::clamp(x, lo, hi);
  }
  const double disc = std::max(0.0, b * b - 4.0 * a * c);
  const double q = -0.5 * (b + std::copysign(std::sqrt(disc), b));
  const double r1 = q / a;
  const double r2 = (q != 0.0) ? c / q : r1;
  if (inside(r1)) return std::clamp(r1, lo, hi);
  if (inside(r2)) return std::clamp(r2, lo, hi);
  return std::numeric_limits<double>::quiet_NaN();
}

}  // namespace detail

/// Limit of repeated application of a belief map. gamma2 is solved in closed
/// form; gamma0/gamma1 through the quadratic their fixed-point equation
/// reduces to, with fixed-point iteration as a fallback.
inline double fixed_point(const ArmParams& arm, BeliefMap map) {
  if (map == BeliefMap::Gamma2) {
    const double den = 1.0 - arm.lambda0() + arm.lambda1();
    if (den <= 0.0) {
      throw Error(Errc::NoConvergence, "gamma2 is the identity map (lambda0 - lambda1 = 1)");
    }
    return arm.lambda1() / den;
  }
  if (!(arm.rho0() > 0.0 && arm.rho1() < 1.0 && arm.rho0() < arm.rho1())) {
    throw Error(Errc::DegenerateObservation,
                "gamma0/gamma1 fixed points require 0 < rho0 < rho1 < 1");
  }
  const bool zero = (map == BeliefMap::Gamma0);
  const double a0 = zero ? 1.0 - arm.rho0() : arm.rho0();
  const double a1 = zero ? 1.0 - arm.rho1() : arm.rho1();
  // pi * (pi a0 + (1-pi) a1) = pi a0 mu0 + (1-pi) a1 mu1
  const double qa = a0 - a1;
  const double qb = a1 - a0 * arm.mu0() + a1 * arm.mu1();
  const double qc = -a1 * arm.mu1();
  const double lo = std::min(arm.mu0(), arm.mu1());
  const double hi = std::max(arm.mu0(), arm.mu1());
  const double root = detail::quadratic_root_in(qa, qb, qc, lo, hi);
  if (std::isfinite(root) && std::abs(apply(arm, map, root) - root) <= kFixedPointResidual) {
    return root;
  }
  return detail::iterate_to_fixed_point(arm, map, 0.5 * (lo + hi));
}

// ---------------------------------------------------------------------------
// Regions of the belief interval used by the closed-form Whittle index. Only
// the family lambda0 = mu0 > mu1 = lambda1 is supported.

enum class Region { A1, A2a, A2b, A2c, A2d, A3, A4, A5 };

constexpr std::string_view to_string(Region r) {
  switch (r) {
    case Region::A1: return "A1";
    case Region::A2a: return "A2a";
    case Region::A2b: return "A2b";
    case Region::A2c: return "A2c";
    case Region::A2d: return "A2d";
    case Region::A3: return "A3";
    case Region::A4: return "A4";
    case Region::A5: return "A5";
  }
  return "?";
}

struct RegionBounds {
  double mu1 = 0.0;
  double gamma1_inf = 0.0;
  double gamma2_inf = 0.0;
  double gamma0_inf = 0.0;
  double mu0 = 0.0;
};

struct RegionLabel {
  Region label = Region::A1;
  RegionBounds bounds;
};

inline constexpr double kParamEqualityTol = 1e-12;

/// True when the arm belongs to the parameter family with closed-form regions.
inline bool supports_regions(const ArmParams& arm) {
  return std::abs(arm.lambda0() - arm.mu0()) <= kParamEqualityTol &&
         std::abs(arm.lambda1() - arm.mu1()) <= kParamEqualityTol && arm.mu0() > arm.mu1() &&
         arm.rewards_tied() && arm.rho0() > 0.0 && arm.rho1() < 1.0;
}

inline RegionBounds region_bounds(const ArmParams& arm) {
  if (!supports_regions(arm)) {
    throw Error(Errc::UnsupportedOrdering,
                "regions need lambda0 = mu0 > mu1 = lambda1, tied rewards and 0 < rho0 < rho1 < 1");
  }
  RegionBounds b;
  b.mu1 = arm.mu1();
  b.mu0 = arm.mu0();
  b.gamma1_inf = fixed_point(arm, BeliefMap::Gamma1);
  b.gamma2_inf = fixed_point(arm, BeliefMap::Gamma2);
  b.gamma0_inf = fixed_point(arm, BeliefMap::Gamma0);
  const bool ordered = 0.0 < b.mu1 && b.mu1 < b.gamma1_inf && b.gamma1_inf < b.gamma2_inf &&
                       b.gamma2_inf < b.gamma0_inf && b.gamma0_inf < b.mu0 && b.mu0 < 1.0;
  if (!ordered) {
    throw Error(Errc::UnsupportedOrdering, "region boundaries are not strictly ordered");
  }
  return b;
}

/// Label pi with its region. A boundary point belongs to the interval on its
/// left: A1 = [0, mu1], A2 = (mu1, g2inf], A3 = (g2inf, g0inf],
/// A4 = (g0inf, mu0], A5 = (mu0, 1].
inline Region classify_region(const ArmParams& arm, const RegionBounds& b, double pi) {
  checked_belief(pi);
  if (pi <= b.mu1) return Region::A1;
  if (pi <= b.gamma2_inf) {
    const double g1 = gamma1(arm, pi);
    if (g1 >= pi) return Region::A2a;
    if (gamma0(arm, pi) >= pi && gamma0(arm, g1) > pi) {
      return gamma1(arm, g1) >= pi ? Region::A2b : Region::A2c;
    }
    return Region::A2d;
  }
  if (pi <= b.gamma0_inf) return Region::A3;
  if (pi <= b.mu0) return Region::A4;
  return Region::A5;
}

inline RegionLabel classify_region(const ArmParams& arm, double pi) {
  RegionLabel out;
  out.bounds = region_bounds(arm);
  out.label = classify_region(arm, out.bounds, pi);
  return out;
}

// ---------------------------------------------------------------------------

/// Parameter families for which the sampling advantage is monotone in pi.
enum class SpecialCase { Case1, Case2, None };

constexpr std::string_view to_string(SpecialCase c) {
  switch (c) {
    case SpecialCase::Case1: return "Case1";
    case SpecialCase::Case2: return "Case2";
    case SpecialCase::None: return "None";
  }
  return "?";
}

inline SpecialCase special_case(const ArmParams& arm) {
  const double dmu = arm.mu0() - arm.mu1();
  const double dlambda = std::abs(arm.lambda0() - arm.lambda1());
  constexpr double eps = 1e-12;
  if (dmu >= 0.0 && dmu <= 0.2 + eps && dlambda <= 0.2 + eps) return SpecialCase::Case1;
  if (-dmu >= 0.0 && -dmu <= 1.0 / 3.0 + eps && dlambda <= 1.0 / 3.0 + eps) {
    return SpecialCase::Case2;
  }
  return SpecialCase::None;
}

/// True under the parameter conditions of the value-function Lipschitz bound.
inline bool lipschitz_conditions(const ArmParams& arm) {
  const double dmu = arm.mu0() - arm.mu1();
  return (dmu > 0.0 && dmu <= 0.5) || (-dmu > 0.0 && -dmu < 1.0);
}

/// Slope factor (1 - beta |mu0 - mu1|)^-1 of the value-function Lipschitz bound.
inline double kappa1(const ArmParams& arm, Discount beta) {
  return 1.0 / (1.0 - beta.value() * std::abs(arm.mu0() - arm.mu1()));
}

/// Constructive lower bound eps / (2u + eps), u = max{rho0, rho1, eta2}, on
/// the discount below which the approximate threshold structure holds.
inline double beta1_lower_bound(const ArmParams& arm, double epsilon) {
  if (!(epsilon > 0.0)) throw Error(Errc::OutOfRange, "epsilon must be positive");
  const double u = std::max({arm.rho0(), arm.rho1(), arm.eta2()});
  return epsilon / (2.0 * u + epsilon);
}

}  // namespace hmb
