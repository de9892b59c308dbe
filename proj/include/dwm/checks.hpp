// Self-contained verification scenarios: each one builds its own fixtures,
// runs an end-to-end computation, and reports pass/fail with a one-line
// numeric summary. The command-line tool exposes them individually and the
// acceptance runner executes all of them in order.
#pragma once

#include <string>
#include <vector>

namespace dwm {

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;      // worst errors / key numbers, for the one-line report
  double elapsed_ms = 0.0;
};

// Value iteration on the hardness family and its one-step-delayed extension
// reproduces the analytic start values and their ratio over a gamma x delta
// grid (tolerance 1e-6, bounded runtime).
CheckResult check_closed_form_grid();

// The delayed-to-undelayed value ratio is exactly 1 at delta = 0, hits its
// analytic minimum at delta = 1/2, and is non-increasing across the grid.
CheckResult check_ratio_endpoints();

// Brute-force returns on the extended process equal the delayed-rollout
// expectation enumerated on the base process, over seeded random instances
// and random extended policies (tolerance 1e-9, bounded runtime).
CheckResult check_reduction_equivalence();

// Exact world models pass the trajectory-distribution congruence check,
// undelayed and behind delayed wrappers, while a perturbed model is rejected
// (TV tolerance 1e-9, negative control above 0.01, bounded runtime).
CheckResult check_model_congruence();

// On seeded random instances: extended-optimal >= memoryless-optimal >=
// uniform-random start value, and the extended optimum never improves as the
// delay grows (tolerance 1e-8).
CheckResult check_policy_ordering();

// Imagination-trained Extended and LatentDeterministic actors reach within 5%
// of the known delayed optimum on the hardness process (median over 5 seeds,
// bounded update count and runtime).
CheckResult check_training_convergence();

// On the masked chain: the extended strategy retains at least as much
// normalized return at d = 8 as the delay-agnostic one, and the agnostic
// decline from d = 0 is at least as steep.
CheckResult check_masked_trend();

// Re-running an experiment config yields byte-identical CSV and JSON output.
CheckResult check_output_determinism();

// All checks, in the order above.
std::vector<CheckResult> run_all_checks();

}  // namespace dwm
