#include "dwm/dp.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace dwm {

namespace {

// Distance-to-fixed-point stopping threshold for a gamma-contraction: once a
// Jacobi sweep moves the iterate by at most this much, the new iterate is
// within tol of the fixed point (and its Bellman residual is below tol too).
double sweep_threshold(double gamma, double tol) {
  if (gamma == 0.0) return std::numeric_limits<double>::infinity();
  return tol * (1.0 - gamma) / gamma;
}

double q_value(const TabularMdp& mdp, const ValueFunction& v, int s, int a) {
  double q = 0.0;
  for (const Outcome& o : mdp.outcomes(s, a))
    q += o.probability * (o.reward + mdp.gamma() * v[o.next_state]);
  return q;
}

}  // namespace

ValueIterationResult value_iteration(const TabularMdp& mdp, const DpOptions& options) {
  const int n = mdp.n_states();
  ValueFunction v = ValueFunction::Zero(n);
  ValueFunction next(n);
  const double threshold = sweep_threshold(mdp.gamma(), options.tol);
  for (std::int64_t sweep = 1; sweep <= options.max_sweeps; ++sweep) {
    double delta = 0.0;
    for (int s = 0; s < n; ++s) {
      double best = -std::numeric_limits<double>::infinity();
      for (int a = 0; a < mdp.n_actions(); ++a) best = std::max(best, q_value(mdp, v, s, a));
      next[s] = best;
      delta = std::max(delta, std::abs(next[s] - v[s]));
    }
    v.swap(next);
    if (delta <= threshold)
      return ValueIterationResult{v, greedy_policy(mdp, v), sweep};
  }
  throw ConvergenceError("value_iteration: no convergence within " +
                         std::to_string(options.max_sweeps) + " sweeps");
}

PolicyTable greedy_policy(const TabularMdp& mdp, const ValueFunction& values) {
  std::vector<int> actions(mdp.n_states(), 0);
  for (int s = 0; s < mdp.n_states(); ++s) {
    double best = q_value(mdp, values, s, 0);
    for (int a = 1; a < mdp.n_actions(); ++a) {
      const double q = q_value(mdp, values, s, a);
      if (q > best) {  // strict: exact ties keep the lower index
        best = q;
        actions[s] = a;
      }
    }
  }
  return PolicyTable::from_actions(actions, mdp.n_actions());
}

Eigen::MatrixXd action_values(const TabularMdp& mdp, const ValueFunction& values) {
  Eigen::MatrixXd q(mdp.n_states(), mdp.n_actions());
  for (int s = 0; s < mdp.n_states(); ++s)
    for (int a = 0; a < mdp.n_actions(); ++a) q(s, a) = q_value(mdp, values, s, a);
  return q;
}

ValueFunction policy_evaluation(const TabularMdp& mdp, const PolicyTable& policy,
                                const DpOptions& options) {
  if (policy.n_states() != mdp.n_states() || policy.n_actions() != mdp.n_actions())
    throw ValidationError("policy_evaluation: policy shape does not match the process");
  const int n = mdp.n_states();
  ValueFunction v = ValueFunction::Zero(n);
  ValueFunction next(n);
  const double threshold = sweep_threshold(mdp.gamma(), options.tol);
  for (std::int64_t sweep = 1; sweep <= options.max_sweeps; ++sweep) {
    double delta = 0.0;
    for (int s = 0; s < n; ++s) {
      double acc = 0.0;
      for (int a = 0; a < mdp.n_actions(); ++a) {
        const double p = policy.probability(s, a);
        if (p > 0.0) acc += p * q_value(mdp, v, s, a);
      }
      next[s] = acc;
      delta = std::max(delta, std::abs(next[s] - v[s]));
    }
    v.swap(next);
    if (delta <= threshold) return v;
  }
  throw ConvergenceError("policy_evaluation: no convergence within " +
                         std::to_string(options.max_sweeps) + " sweeps");
}

namespace {

double enumerate_return(const TabularMdp& mdp, const PolicyTable& policy, int s, int depth,
                        double& leaf_budget) {
  if (depth == 0) {
    if (--leaf_budget < 0.0)
      throw EnumerationGuardError("brute_force_return: trajectory tree exceeds the leaf cap");
    return 0.0;
  }
  double total = 0.0;
  for (int a = 0; a < mdp.n_actions(); ++a) {
    const double pa = policy.probability(s, a);
    if (pa == 0.0) continue;
    double branch = 0.0;
    for (const Outcome& o : mdp.outcomes(s, a)) {
      if (o.probability == 0.0) continue;
      branch += o.probability *
                (o.reward +
                 mdp.gamma() * enumerate_return(mdp, policy, o.next_state, depth - 1, leaf_budget));
    }
    total += pa * branch;
  }
  return total;
}

}  // namespace

double brute_force_return(const TabularMdp& mdp, const PolicyTable& policy, int horizon,
                          int start, double max_leaves) {
  if (policy.n_states() != mdp.n_states() || policy.n_actions() != mdp.n_actions())
    throw ValidationError("brute_force_return: policy shape does not match the process");
  if (start < 0 || start >= mdp.n_states())
    throw ValidationError("brute_force_return: start state out of range");
  if (horizon < 0) throw ValidationError("brute_force_return: horizon must be nonnegative");

  double leaf_budget = max_leaves;
  return enumerate_return(mdp, policy, start, horizon, leaf_budget);
}

}  // namespace dwm
