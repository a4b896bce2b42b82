#pragma once

#include <gtest/gtest.h>

#include <random>

#include "hmbandit/arm_model.hpp"
#include "hmbandit/error.hpp"

namespace testing_support {

inline hmb::RawArm fig2_raw() { return {0.9, 0.1, 0.1, 0.9, 0.1, 0.9, 0.1, 0.9, 0.0}; }
inline hmb::ArmParams fig2() { return hmb::ArmParams::validate(fig2_raw()); }

// lambda0 = mu0 = 0.9 > mu1 = lambda1 = 0.1, rho = eta = (0.1, 0.95)
inline hmb::RawArm ordered_raw() { return {0.9, 0.1, 0.9, 0.1, 0.1, 0.95, 0.1, 0.95, 0.0}; }
inline hmb::ArmParams ordered() { return hmb::ArmParams::validate(ordered_raw()); }

/// Random strictly valid arm with tied rewards and 0 < rho0 < rho1 < 1.
inline hmb::ArmParams random_arm(std::mt19937_64& g) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  hmb::RawArm r;
  r.lambda0 = u(g);
  r.lambda1 = u(g);
  r.mu0 = u(g);
  r.mu1 = u(g);
  r.rho0 = 0.01 + 0.9 * u(g);
  r.rho1 = r.rho0 + (0.99 - r.rho0) * (0.05 + 0.95 * u(g));
  r.eta0 = r.rho0;
  r.eta1 = r.rho1;
  return hmb::ArmParams::validate(r);
}

template <class F>
hmb::Errc code_of(F&& fn) {
  try {
    fn();
  } catch (const hmb::Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an hmb::Error";
  return hmb::Errc::ParseError;
}

}  // namespace testing_support
