#pragma once

// Monte-Carlo simulation of the N-armed hidden Markov bandit: one arm is
// sampled per slot, every arm's hidden state moves, beliefs follow the filter.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "hmbandit/arm_model.hpp"
#include "hmbandit/error.hpp"
#include "hmbandit/index.hpp"

namespace hmb {

enum class InitialBeliefMode { Random, Fixed };

struct BanditConfig {
  std::vector<ArmParams> arms;
  double beta = 0.99;
  std::size_t horizon = 2000;
  std::size_t iterations = 100;
  std::uint64_t seed = 1;
  InitialBeliefMode initial_mode = InitialBeliefMode::Random;
  std::vector<double> initial_beliefs;  // used in Fixed mode, one per arm
};

inline void check_config(const BanditConfig& cfg) {
  if (cfg.arms.empty()) throw Error(Errc::OutOfRange, "a bandit needs at least one arm");
  if (cfg.horizon < 1) throw Error(Errc::OutOfRange, "horizon must be at least 1");
  if (cfg.iterations < 1) throw Error(Errc::OutOfRange, "iterations must be at least 1");
  (void)Discount(cfg.beta);
  if (cfg.initial_mode == InitialBeliefMode::Fixed) {
    if (cfg.initial_beliefs.size() != cfg.arms.size()) {
      throw Error(Errc::OutOfRange, "fixed initial beliefs need one value per arm");
    }
    for (double pi : cfg.initial_beliefs) checked_belief(pi);
  }
}

// ---------------------------------------------------------------------------
// Random streams

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Independent generator for one (seed, episode, stream) triple.
class Stream {
 public:
  Stream(std::uint64_t seed, std::uint64_t episode, std::uint64_t stream)
      : engine_(splitmix64(splitmix64(splitmix64(seed) ^ episode) ^ stream)) {}

  /// Uniform on [0, 1) from the top 53 bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

 private:
  std::mt19937_64 engine_;
};

/// Per-episode randomness. Arm n owns stream n; the random policy draws from
/// its own stream so that policies see the same hidden-state and signal paths.
class EpisodeRng {
 public:
  EpisodeRng(std::uint64_t seed, std::uint64_t episode, std::size_t n_arms)
      : policy_(seed, episode, kPolicyStream) {
    arms_.reserve(n_arms);
    for (std::size_t n = 0; n < n_arms; ++n) arms_.emplace_back(seed, episode, n);
  }

  Stream& arm(std::size_t n) { return arms_.at(n); }
  Stream& policy() { return policy_; }
  std::size_t size() const noexcept { return arms_.size(); }

 private:
  static constexpr std::uint64_t kPolicyStream = 0xffff'ffff'ffff'fff0ULL;
  std::vector<Stream> arms_;
  Stream policy_;
};

// ---------------------------------------------------------------------------
// Dynamics

struct SystemState {
  std::vector<int> hidden;      // X_n(t) in {0, 1}
  std::vector<double> beliefs;  // P(X_n(t) = 0)
  std::size_t slot = 0;
};

inline SystemState initial_state(const BanditConfig& cfg, EpisodeRng& rng) {
  SystemState s;
  const std::size_t n = cfg.arms.size();
  s.hidden.resize(n);
  s.beliefs.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    Stream& r = rng.arm(k);
    const double pi = cfg.initial_mode == InitialBeliefMode::Fixed ? cfg.initial_beliefs[k]
                                                                   : r.uniform();
    s.beliefs[k] = pi;
    s.hidden[k] = r.uniform() < pi ? 0 : 1;
  }
  return s;
}

struct StepResult {
  int signal = 0;
  /// Reward of the sampled arm plus the passive reward of every other arm.
  double reward = 0.0;
  SystemState next;
};

/// Advances every arm by one slot with arm `chosen` sampled. Each arm draws
/// exactly two uniforms per slot whether or not it is sampled.
inline StepResult step(const std::vector<ArmParams>& arms, const SystemState& state,
                       std::size_t chosen, EpisodeRng& rng) {
  if (chosen >= arms.size()) throw Error(Errc::OutOfRange, "chosen arm out of range");
  StepResult out;
  out.next = state;
  out.next.slot = state.slot + 1;
  for (std::size_t n = 0; n < arms.size(); ++n) {
    const ArmParams& a = arms[n];
    Stream& r = rng.arm(n);
    const double u_signal = r.uniform();
    const double u_move = r.uniform();
    const int x = state.hidden[n];
    const double pi = state.beliefs[n];
    if (n == chosen) {
      const double p1 = x == 0 ? a.rho0() : a.rho1();
      out.signal = u_signal < p1 ? 1 : 0;
      out.reward += x == 0 ? a.eta0() : a.eta1();
      const double to_zero = x == 0 ? a.mu0() : a.mu1();
      out.next.hidden[n] = u_move < to_zero ? 0 : 1;
      out.next.beliefs[n] = out.signal == 1 ? gamma1(a, pi) : gamma0(a, pi);
    } else {
      out.reward += a.eta2();
      const double to_zero = x == 0 ? a.lambda0() : a.lambda1();
      out.next.hidden[n] = u_move < to_zero ? 0 : 1;
      out.next.beliefs[n] = gamma2(a, pi);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Policies

/// One-slot expected reward of sampling the arm at belief pi.
inline double myopic_index(const ArmParams& arm, double pi) {
  return pi * arm.eta0() + (1.0 - pi) * arm.eta1();
}

struct WhittlePolicy {
  const std::vector<WhittleTable>* tables = nullptr;
};
struct MyopicPolicy {};
struct RandomPolicy {};

using Policy = std::variant<WhittlePolicy, MyopicPolicy, RandomPolicy>;

inline std::string policy_name(const Policy& p) {
  switch (p.index()) {
    case 0: return "whittle";
    case 1: return "myopic";
    default: return "random";
  }
}

struct EpisodeTrace {
  std::vector<std::size_t> chosen;
  std::vector<int> signal;
  std::vector<double> reward;
  std::vector<double> discounted_cumulative;

  /// A_n(t): 1 for the sampled arm, 0 for the rest.
  std::vector<int> actions(std::size_t t, std::size_t n_arms) const {
    std::vector<int> a(n_arms, 0);
    a.at(chosen.at(t)) = 1;
    return a;
  }
  double discounted_total() const {
    return discounted_cumulative.empty() ? 0.0 : discounted_cumulative.back();
  }
};

namespace detail {

inline void check_policy(const BanditConfig& cfg, const Policy& policy) {
  const auto* w = std::get_if<WhittlePolicy>(&policy);
  if (!w) return;
  if (w->tables == nullptr || w->tables->size() != cfg.arms.size()) {
    throw Error(Errc::MissingIndexTable, "the Whittle policy needs one index table per arm");
  }
  for (const WhittleTable& t : *w->tables) {
    if (t.entries.empty()) throw Error(Errc::MissingIndexTable, "empty Whittle index table");
    if (std::abs(t.beta - cfg.beta) > 1e-12) {
      std::ostringstream os;
      os << "Whittle table built for beta = " << t.beta << ", config has " << cfg.beta;
      throw Error(Errc::MissingIndexTable, os.str());
    }
  }
}

inline std::size_t choose(const BanditConfig& cfg, const Policy& policy, const SystemState& s,
                          EpisodeRng& rng) {
  std::size_t best = 0;
  double best_index = -std::numeric_limits<double>::infinity();
  for (std::size_t n = 0; n < cfg.arms.size(); ++n) {
    double idx = 0.0;
    if (const auto* w = std::get_if<WhittlePolicy>(&policy)) {
      idx = (*w->tables)[n].index(s.beliefs[n]);
    } else if (std::holds_alternative<MyopicPolicy>(policy)) {
      idx = myopic_index(cfg.arms[n], s.beliefs[n]);
    } else {
      idx = rng.policy().uniform();
    }
    if (idx > best_index) {  // strict: ties keep the lowest arm id
      best_index = idx;
      best = n;
    }
  }
  return best;
}

}  // namespace detail

inline EpisodeTrace run_episode(const BanditConfig& cfg, const Policy& policy,
                                std::uint64_t episode) {
  check_config(cfg);
  detail::check_policy(cfg, policy);
  EpisodeRng rng(cfg.seed, episode, cfg.arms.size());
  SystemState state = initial_state(cfg, rng);

  EpisodeTrace tr;
  tr.chosen.reserve(cfg.horizon);
  tr.signal.reserve(cfg.horizon);
  tr.reward.reserve(cfg.horizon);
  tr.discounted_cumulative.reserve(cfg.horizon);
  double discount = 1.0;
  double total = 0.0;
  for (std::size_t t = 0; t < cfg.horizon; ++t) {
    const std::size_t n = detail::choose(cfg, policy, state, rng);
    StepResult r = step(cfg.arms, state, n, rng);
    total += discount * r.reward;
    discount *= cfg.beta;
    tr.chosen.push_back(n);
    tr.signal.push_back(r.signal);
    tr.reward.push_back(r.reward);
    tr.discounted_cumulative.push_back(total);
    state = std::move(r.next);
  }
  return tr;
}

// ---------------------------------------------------------------------------
// Aggregation

struct PolicyStats {
  std::string name;
  std::vector<double> mean_reward;  // per slot, over all episodes
  double mean_discounted = 0.0;
  double stderr_discounted = 0.0;

  /// Mean of the per-slot means over slots [from, to).
  double time_average(std::size_t from, std::size_t to) const {
    to = std::min(to, mean_reward.size());
    if (from >= to) throw Error(Errc::OutOfRange, "empty slot range");
    double s = 0.0;
    for (std::size_t t = from; t < to; ++t) s += mean_reward[t];
    return s / static_cast<double>(to - from);
  }
};

struct SimStats {
  std::uint64_t seed = 0;
  std::size_t iterations = 0;
  std::size_t horizon = 0;
  std::vector<PolicyStats> policies;
};

inline SimStats monte_carlo(const BanditConfig& cfg, const std::vector<Policy>& policies) {
  check_config(cfg);
  SimStats out{cfg.seed, cfg.iterations, cfg.horizon, {}};
  for (const Policy& p : policies) {
    detail::check_policy(cfg, p);
    PolicyStats ps;
    ps.name = policy_name(p);
    ps.mean_reward.assign(cfg.horizon, 0.0);
    double sum = 0.0;
    double sum_sq = 0.0;
    for (std::size_t k = 0; k < cfg.iterations; ++k) {
      const EpisodeTrace tr = run_episode(cfg, p, k);
      for (std::size_t t = 0; t < cfg.horizon; ++t) ps.mean_reward[t] += tr.reward[t];
      const double d = tr.discounted_total();
      sum += d;
      sum_sq += d * d;
    }
    const double k = static_cast<double>(cfg.iterations);
    for (double& m : ps.mean_reward) m /= k;
    ps.mean_discounted = sum / k;
    if (cfg.iterations > 1) {
      const double var =
          std::max(0.0, (sum_sq - k * ps.mean_discounted * ps.mean_discounted) / (k - 1.0));
      ps.stderr_discounted = std::sqrt(var / k);
    }
    out.policies.push_back(std::move(ps));
  }
  return out;
}

}  // namespace hmb
