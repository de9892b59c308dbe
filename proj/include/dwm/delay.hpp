// Everything that turns an undelayed process into its delayed-observation
// counterpart: the extended-state reduction, delayed rollouts, and the
// shift-back realignment that recovers undelayed training data.
#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "dwm/mdp.hpp"
#include "dwm/rng.hpp"

namespace dwm {

// Observation delay specification. Only constant delays are implemented;
// Stochastic is reserved and rejected wherever a schedule is consumed.
struct DelaySchedule {
  enum class Kind { Constant, Stochastic };

  Kind kind = Kind::Constant;
  int delay = 0;

  static DelaySchedule constant(int d);
  void validate() const;  // throws unless a usable constant schedule
};

// Index arithmetic for the extended state space S x A^d.
//
// An extended state pairs the last observed base state s with the queue of
// the d actions taken since then, oldest first. Indices are mixed-radix with
// the base state as the most significant digit:
//   index = ((s * |A| + q[0]) * |A| + q[1]) * |A| + ... + q[d-1]
// so decode/encode are exact inverses and the layout is documented here once.
class ExtendedSpace {
 public:
  ExtendedSpace(int n_base_states, int n_actions, int d, std::int64_t max_states = 1000000);

  int n_base_states() const { return n_base_states_; }
  int n_actions() const { return n_actions_; }
  int d() const { return d_; }
  int n_states() const { return static_cast<int>(n_states_); }

  int encode(int base_state, const std::vector<int>& queue) const;
  int base_state(int index) const;
  std::vector<int> queue(int index) const;

  // Successor index under the queue-shift rule: the oldest queued action
  // leaves, `action` enters at the back, the base state becomes `next_base`.
  int shift(int index, int next_base, int action) const;

 private:
  int n_base_states_;
  int n_actions_;
  int d_;
  std::int64_t n_states_;
  std::int64_t queue_radix_;  // |A|^d
};

// Constant-delay extended MDP: states S x A^d; taking action a from (s, q)
// resolves the base transition (s, q[0]), pays its reward now, and appends a
// to the queue. With d = 0 this is a copy of the input. The initial state is
// (base initial state, all-zero queue); rollout-style starts with other
// queues are reachable through ExtendedSpace::encode.
TabularMdp extend_mdp(const TabularMdp& mdp, int d, std::int64_t max_states = 1000000);

// What an acting agent sees at step t of a delayed rollout, before choosing.
// obs is o_{t-d} (empty while the first observation is still in flight) and
// reward is r_{t-d} when that reward has already been generated (d >= 1).
// queue holds the agent's own last min(t, d) actions, oldest first.
struct AgentView {
  int t = 0;
  std::optional<int> obs;
  double reward = 0.0;
  std::vector<int> queue;
};

using AgentCallback = std::function<int(const AgentView&)>;

// One step of a delayed episode as the agent experienced it, plus hidden
// diagnostics (the true state, observation and reward of the same step) that
// only tests and realignment may consult.
struct DelayedStep {
  int t = 0;
  int action = 0;
  std::optional<int> obs;  // o_{t-d}; empty = dummy marker
  double reward = 0.0;     // r_{t-d}; 0 while dummy
  int hidden_state = 0;
  int hidden_obs = 0;
  double hidden_reward = 0.0;
};

struct DelayedTrajectory {
  int d = 0;
  std::vector<DelayedStep> steps;
};

// Rolls one episode of `horizon` steps. The environment advances undelayed;
// the agent is shown observation and reward from d steps earlier. Until the
// first observation arrives the agent is not consulted: those actions come
// from `warmup_actions` when given (length d), otherwise uniformly at random
// from the seeded stream.
DelayedTrajectory delayed_rollout(const TabularPomdp& pomdp, const DelaySchedule& schedule,
                                  const AgentCallback& agent, int horizon, Rng& rng,
                                  const std::optional<std::vector<int>>& warmup_actions = {});

// Undelayed transition recovered by shift-back: the observation and reward
// that belong to the stored action, plus the window of the d actions taken
// from this index on (exactly the queue a later extended decision needs).
struct ReplayEntry {
  int obs = 0;
  int action = 0;
  double reward = 0.0;
  std::vector<int> window;
  int hidden_state = 0;  // diagnostics channel
};

struct ReplayEpisode {
  int d = 0;
  std::vector<ReplayEntry> entries;
  // Trailing actions whose delivery never arrived (the last min(d, H) steps).
  // Kept so windows stay derivable and serialized episodes keep all H steps.
  std::vector<int> tail_actions;
  std::vector<int> tail_hidden;
};

// Sealed-once-written store of realigned episodes. All episodes share one
// delay; a horizon-H episode contributes exactly H - d entries.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(int d);

  int d() const { return d_; }
  void add(ReplayEpisode episode);
  const std::vector<ReplayEpisode>& episodes() const { return episodes_; }
  std::int64_t n_entries() const { return n_entries_; }

 private:
  int d_;
  std::vector<ReplayEpisode> episodes_;
  std::int64_t n_entries_;
};

// Realigns a delayed trajectory into undelayed entries: entry u combines the
// action taken at step u with the observation and reward delivered at step
// u + d. Only indices whose data has arrived are emitted (H - d of them), so
// no entry ever references the future of its own step.
ReplayEpisode shift_back(const DelayedTrajectory& trajectory);

// Deterministic extended-state policy used by the equivalence oracle.
using ExtendedPolicy = std::function<int(int base_state, const std::vector<int>& queue)>;

// Expected discounted return of `horizon` base steps under delayed-rollout
// semantics, computed by exhaustive enumeration of the base process: the
// first d actions are warmup_queue, afterwards the policy sees the state
// from d steps back plus the actions since. This walks the base process
// directly and never builds the extended MDP, so it can cross-check it.
double enumerate_delayed_return(const TabularMdp& mdp, const ExtendedPolicy& policy, int d,
                                int horizon, const std::vector<int>& warmup_queue,
                                double max_leaves = 1e7);

// Trajectory / replay JSON-lines. One record per step:
//   {"t": int, "a": int, "obs": int | "dummy": true, "r": real, "hidden_s": int}
// Replay episodes use the same schema with t the realigned index; episode
// boundaries are where t restarts at zero.
std::string to_jsonl(const DelayedTrajectory& trajectory);
std::string to_jsonl(const ReplayBuffer& buffer);
DelayedTrajectory trajectory_from_jsonl(const std::string& text, int d);
ReplayBuffer replay_from_jsonl(const std::string& text, int d);

}  // namespace dwm
