#pragma once

// Numerical self-checks against independent oracles: finite differences,
// brute-force loops, value iteration and closed-form statistics. Shared by the
// `selftest` subcommand and the acceptance suite.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "dvfsflow/types.hpp"

namespace dvfsflow::checks {

struct CheckResult {
  std::string name;
  bool passed = false;
  double value = 0.0;      // measured quantity
  double threshold = 0.0;  // pass bound it was compared against
  std::string detail;
};

// Deterministic 2-state / 2-action MDP: next_state[s][a], reward[s][a].
struct TabularMdp {
  std::array<std::array<int, 2>, 2> next_state{{{0, 1}, {0, 1}}};
  std::array<std::array<double, 2>, 2> reward{{{0.0, 1.0}, {2.0, 0.5}}};
  double discount = 0.9;
};

/// Q* by value iteration to a 1e-12 fixed point.
std::array<std::array<double, 2>, 2> value_iteration(const TabularMdp& mdp);

struct TabularDqnResult {
  double max_error = 0.0;   // after all updates
  int first_within = -1;    // first update count with error below the bound, -1 if never
  int updates = 0;
};

/// DQN with a linear one-hot (tabular capacity) Q-network trained on the four
/// exhaustive transitions, replayed every update.
TabularDqnResult tabular_dqn(const TabularMdp& mdp, int updates, double bound, std::uint64_t seed);

/// Double-loop Pearson straight from the definition.
Matrix brute_force_pearson(const Matrix& data);

CheckResult check_gradients(std::uint64_t seed);
CheckResult check_pearson(std::uint64_t seed);
CheckResult check_bootstrap_fraction(std::uint64_t seed);
CheckResult check_wasserstein_uniform(std::uint64_t seed);
CheckResult check_tabular_convergence(std::uint64_t seed);
CheckResult check_flow_moments(std::uint64_t seed);

std::vector<CheckResult> run_all(std::uint64_t seed);

}  // namespace dvfsflow::checks
