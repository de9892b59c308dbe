// Belief-state world models over tabular processes: exact Bayesian filters
// used in two modes. Interaction folds real observations into the belief;
// imagination runs the model as a stateful simulator of the process it was
// built from. Imagination carries a sampled hidden-state hypothesis alongside
// the belief so imagined rewards stay correlated across time exactly as real
// ones are; the one-step imagine_step resamples from the belief instead and
// therefore only matches interaction one step at a time.
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "dwm/delay.hpp"
#include "dwm/mdp.hpp"
#include "dwm/rng.hpp"
#include "dwm/serialization.hpp"

namespace dwm {

// Belief entries must be nonnegative and sum to one within this tolerance.
inline constexpr double kBeliefTolerance = 1e-12;

// The tabular latent state: a probability simplex over hidden states.
struct WorldModelState {
  Eigen::VectorXd belief;

  void validate() const;

  static WorldModelState one_hot(int n_states, int state);
  static WorldModelState uniform(int n_states);
};

// Count tables a fitted model was estimated from; kept for serialization and
// inspection. Rewards are part of the transition key because the kernel is
// joint over (successor, reward).
struct TransitionCount {
  int state = 0;
  int action = 0;
  int next_state = 0;
  double reward = 0.0;
  std::int64_t count = 0;
};

struct ObservationCount {
  int state = 0;
  int obs = 0;
  std::int64_t count = 0;
};

struct FitCounts {
  std::vector<TransitionCount> transitions;
  std::vector<ObservationCount> observations;
};

// A world model over a finite process: transition/reward kernel plus a
// per-state observation distribution, either copied exactly from a known
// POMDP or estimated from replay counts.
class TabularWorldModel {
 public:
  // Bitwise copy of a known process.
  static TabularWorldModel exact(TabularPomdp pomdp);

  // Estimated process; used by fit_tabular_model and deserialization.
  static TabularWorldModel learned(TabularPomdp pomdp, double alpha,
                                   std::optional<FitCounts> counts);

  int n_states() const { return process_.mdp().n_states(); }
  int n_actions() const { return process_.mdp().n_actions(); }
  int n_obs() const { return process_.n_obs(); }
  double gamma() const { return process_.mdp().gamma(); }
  bool fitted() const { return fitted_; }
  double alpha() const { return alpha_; }
  const TabularPomdp& process() const { return process_; }
  const std::optional<FitCounts>& counts() const { return counts_; }

  // One-hot at the process's initial state.
  WorldModelState initial_state() const;

  // Interaction-mode update: b'(s') ∝ O(o|s') Σ_s T(s'|s,a) b(s). An
  // observation with zero predictive probability signals model mismatch.
  WorldModelState belief_update(const WorldModelState& b, int a, int o) const;

  // Conditioning on an observation without an intervening action; used for
  // the very first observation of an episode.
  WorldModelState condition_on_obs(const WorldModelState& b, int o) const;

  // Deterministic (marginalized) one-step prediction: no observation.
  WorldModelState predict_belief(const WorldModelState& b, int a) const;

  // Sampled one-step imagination: draw a hidden state from b, a transition
  // and reward from the kernel, an observation from the successor, and
  // condition on that observation. Matches the interaction-mode distribution
  // of (b', r) one step at a time when the model is exact.
  std::pair<WorldModelState, double> imagine_step(const WorldModelState& b, int a,
                                                  Rng& rng) const;

  // P(o | b, a) for all o.
  Eigen::VectorXd obs_probabilities(const WorldModelState& b, int a) const;

  // Σ_s b(s) E[r | s, a].
  double expected_reward(const WorldModelState& b, int a) const;

  // Path-consistent sampling primitives for stateful simulation: advance a
  // single hidden-state hypothesis and emit its observation.
  struct SampledStep {
    int next_state = 0;
    double reward = 0.0;
    int obs = 0;
  };
  SampledStep sample_step(int state, int a, Rng& rng) const;
  int sample_state(const WorldModelState& b, Rng& rng) const;
  int sample_obs(int state, Rng& rng) const;

 private:
  TabularWorldModel(TabularPomdp process, bool fitted, double alpha,
                    std::optional<FitCounts> counts);

  TabularPomdp process_;
  bool fitted_;
  double alpha_;
  std::optional<FitCounts> counts_;

  // Dense caches: transition_[a](s', s) = T(s'|s,a); obs_(s, o) = O(o|s);
  // expected_reward_(s, a) = E[r|s,a].
  std::vector<Eigen::MatrixXd> transition_;
  Eigen::MatrixXd obs_;
  Eigen::MatrixXd expected_reward_;
};

// Count-based estimation from realigned replay. Transition and observation
// rows get Laplace smoothing alpha; rewards use the empirical conditional
// distribution over the observed support of each (s, a, s') cell (reward 0
// for cells reachable only through smoothing mass); all-zero rows fall back
// to uniform. The discount is not identifiable from replay and must be
// supplied; initial_state -1 infers the first recorded hidden state.
TabularWorldModel fit_tabular_model(const ReplayBuffer& buffer, int n_states, int n_actions,
                                    int n_obs, double alpha, double gamma = 0.99,
                                    int initial_state = -1);

// d-step delayed wrapper around a world model. In imagination, call t reads
// state m_{t-d} (absent for the first d calls), advances the inner model with
// the given action, and returns reward r_{t-d} (0 for the first d calls). In
// interaction, the first d steps are dummies; afterwards step t feeds the
// delayed observation o_{t-d}, advances the inner filter with the delayed
// action a_{t-d}, and passes the delayed reward through.
class DelayedWorldModel {
 public:
  DelayedWorldModel(TabularWorldModel inner, int d);

  int delay() const { return d_; }
  const TabularWorldModel& inner() const { return inner_; }

  // Imagination mode. reset samples the hidden-state hypothesis from b0.
  void reset_imagination(Rng& rng);
  void reset_imagination(const WorldModelState& b0, Rng& rng);
  std::pair<std::optional<WorldModelState>, double> imagine(int action, Rng& rng);

  // Interaction mode. The first d steps must be interact_dummy() calls.
  void reset_interaction();
  void reset_interaction(const WorldModelState& b0);
  void interact_dummy();
  std::pair<WorldModelState, double> interact(int delayed_obs, int delayed_action,
                                              double delayed_reward);

  // Current inner belief; requires a reset first.
  const WorldModelState& inner_state() const;

 private:
  enum class Mode { Unset, Imagination, Interaction };

  TabularWorldModel inner_;
  int d_;
  Mode mode_ = Mode::Unset;
  int t_ = 0;
  int particle_ = 0;
  bool obs_seen_ = false;
  std::optional<int> pending_action_;
  std::vector<WorldModelState> state_history_;
  std::vector<double> reward_history_;
};

// Named constructor for the delayed wrapper.
DelayedWorldModel make_delayed(TabularWorldModel model, int d);

// Trajectory-distribution agreement between a model and a process. For a
// fixed action sequence, enumerates the exact joint distribution of the
// (latent state, reward) sequence up to the horizon under (i) interaction:
// the process generates transitions, rewards and observations while the
// model filters, and (ii) imagination: the model generates everything
// itself. Belief atoms are keyed by quantizing components to 12 decimal
// digits; the report carries the total-variation distance between the two
// distributions.
struct CongruenceReport {
  double tv_distance = 0.0;
  int horizon = 0;
  int d = 0;
  bool pass = false;
};

Json to_json(const CongruenceReport& report);

CongruenceReport congruence_check(const TabularWorldModel& model, const TabularPomdp& env,
                                  const std::vector<int>& actions, int horizon, double tol,
                                  double max_branches = 1e6);

// Delayed variant: compares the d-step delayed wrapper against the d-step
// delayed view of env. Both sides prepend d deterministic dummy steps to the
// undelayed processes, so the distance equals the undelayed distance at
// horizon max(0, horizon - d); the enumeration exploits that identity.
CongruenceReport congruence_check(const DelayedWorldModel& model, const TabularPomdp& env,
                                  const std::vector<int>& actions, int horizon, double tol,
                                  double max_branches = 1e6);

Json to_json(const TabularWorldModel& model);
TabularWorldModel world_model_from_json(const Json& doc);

}  // namespace dwm
