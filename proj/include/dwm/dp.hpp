// Exact planning on TabularMdp: value iteration, policy evaluation, and an
// independent brute-force return oracle used to cross-check both.
#pragma once

#include <cstdint>

#include "dwm/mdp.hpp"

namespace dwm {

struct DpOptions {
  double tol = 1e-9;                   // sup-norm guarantee, see below
  std::int64_t max_sweeps = 1000000;   // exceeded -> ConvergenceError
};

struct ValueIterationResult {
  ValueFunction values;
  PolicyTable policy;
  std::int64_t sweeps = 0;
};

// Optimal values and a greedy deterministic policy. Sweeps stop once the
// returned iterate is within tol of the fixed point in sup-norm (which also
// bounds the Bellman residual by tol). Exact greedy ties break toward the
// lowest action index.
ValueIterationResult value_iteration(const TabularMdp& mdp, const DpOptions& options = {});

// Greedy deterministic policy of a value function, lowest index on ties.
PolicyTable greedy_policy(const TabularMdp& mdp, const ValueFunction& values);

// One-step lookahead values: Q(s, a) = sum_s' P(s'|s,a) (r + gamma V(s')).
Eigen::MatrixXd action_values(const TabularMdp& mdp, const ValueFunction& values);

// Fixed point of the policy Bellman operator within tol (sup-norm).
ValueFunction policy_evaluation(const TabularMdp& mdp, const PolicyTable& policy,
                                const DpOptions& options = {});

// Expected discounted return over exactly `horizon` steps from `start`,
// computed by exhaustively enumerating the trajectory tree (no dynamic
// programming; this is the oracle the DP routines are tested against).
// Trees whose worst-case leaf count exceeds max_leaves are rejected with
// EnumerationGuardError.
double brute_force_return(const TabularMdp& mdp, const PolicyTable& policy, int horizon,
                          int start, double max_leaves = 1e7);

}  // namespace dwm
