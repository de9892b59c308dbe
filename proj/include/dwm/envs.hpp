// Benchmark process constructors: the three-state hardness MDP with its
// closed-form values, a factored position/velocity chain, masked-observability
// wrappers, and seeded random instances for property tests.
#pragma once

#include <cstdint>

#include "dwm/mdp.hpp"

namespace dwm {

// Hardness family: a rewarding loop state s1, a mirror state s2 and an
// absorbing trap s3. delta controls how often the loop action crosses to the
// mirror state; the +1 reward attaches to taking the loop action in s1 on
// both outgoing branches.
struct Fig2Params {
  double delta = 0.5;
  double gamma = 0.9;

  void validate() const;
};

TabularMdp fig2_mdp(const Fig2Params& params);

// Analytic optimal values: undelayed start value, the one-step-delayed start
// value, and their ratio.
struct Fig2ClosedForms {
  double v_undelayed = 0.0;
  double v_delayed_d1 = 0.0;
  double ratio = 0.0;
};

Fig2ClosedForms fig2_closed_forms(const Fig2Params& params);

// An MDP whose states factor as position x velocity.
struct FactoredMdp {
  TabularMdp mdp;
  int n_positions;
  int n_velocities;

  FactoredMdp(TabularMdp mdp, int n_positions, int n_velocities);

  int state(int position, int velocity) const;
  int position(int state) const { return state / n_velocities; }
  int velocity(int state) const { return state % n_velocities; }
};

// Position cycles deterministically (an observable clock); the binary
// velocity is an exogenous sticky component flipping with probability
// flip_prob per step; the action guesses the current velocity and earns 1 on
// a match. Knowing the velocity k steps ago makes the best per-step reward
// (1 + (1-2*flip_prob)^k) / 2, so value decays smoothly with observation lag.
struct VelocityChainParams {
  int n_positions = 4;
  double flip_prob = 0.05;
  double gamma = 0.9;

  void validate() const;
};

FactoredMdp velocity_chain(const VelocityChainParams& params);

// Per-step probabilistic masking of the position factor. The observation
// always reveals the velocity; with probability rho the position slot is
// replaced by an aliased marker. Observation index = (position, or P for the
// marker) * V + velocity; the observation space keeps its full size even when
// rho makes some columns unreachable.
//
// Because the velocity is observed every step, filtered beliefs stay sharp in
// the velocity factor no matter how often the position is masked, while any
// d-step belief propagation leaves the velocity factor diffuse. Delayed
// policies keyed on propagated beliefs therefore operate on a belief set
// disjoint from everything an undelayed filter produces.
struct MaskedObsConfig {
  double rho = 0.5;

  void validate() const;
};

TabularPomdp masked_pomdp(const FactoredMdp& base, const MaskedObsConfig& cfg);

// Seeded random POMDP. sparsity in [0, 1) is the approximate fraction of
// zero entries per kernel and observation row; every observation column is
// guaranteed some mass so serialization round-trips preserve the dimensions.
TabularPomdp random_instance(std::uint64_t seed, int n_states, int n_actions, int n_obs,
                             double sparsity);

}  // namespace dwm
