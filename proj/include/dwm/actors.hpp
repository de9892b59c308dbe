// Delay-handling acting strategies over a tabular world model: exact dynamic-
// programming solvers where the policy class is finite, and a toy-scale
// actor-critic trained entirely inside model imagination.
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dwm/delay.hpp"
#include "dwm/dp.hpp"
#include "dwm/mdp.hpp"
#include "dwm/rng.hpp"
#include "dwm/serialization.hpp"
#include "dwm/worldmodel.hpp"

namespace dwm {

// How an actor copes with observation delay d:
//   Extended           conditions on (delayed belief, queue of the d pending
//                      actions) -- the extended-state reduction as a policy.
//   Memoryless         conditions on the delayed belief alone.
//   LatentDeterministic / LatentSampled
//                      propagate the delayed belief through the pending
//                      actions (expected / sampled one-step predictions) and
//                      feed the result to an undelayed-form policy.
//   Agnostic           a policy trained with no delay at all, deployed behind
//                      a delay via deterministic latent propagation.
enum class StrategyKind {
  Extended,
  Memoryless,
  LatentDeterministic,
  LatentSampled,
  Agnostic,
};

std::string strategy_name(StrategyKind kind);
StrategyKind strategy_from_name(const std::string& name);

// Stable lookup key of a quantized belief; resolution matches the belief
// comparison tolerance so keys computed along identical filtering paths are
// identical strings.
std::string belief_key(const WorldModelState& state);

// Key of (belief, pending-action queue) pairs for extended-state tables.
std::string extended_key(const WorldModelState& state, const std::vector<int>& queue);

// Softmax policy over string-keyed rows of logits. A key with no row yet is
// the uniform policy, so an empty table is the uniform random actor.
struct KeyedPolicy {
  int n_actions = 0;
  std::map<std::string, Eigen::VectorXd> logits;

  Eigen::VectorXd probabilities(const std::string& key) const;
  int sample(const std::string& key, Rng& rng) const;
};

// Value table over quantized belief keys; missing keys read as 0.
struct KeyedCritic {
  std::map<std::string, double> table;

  double value(const std::string& key) const;
};

// Knobs of imagination training. Defaults are the tabular-scale settings used
// throughout: horizon 16, lambda-returns with lambda 0.95, learning rates
// 0.1, entropy bonus 0.01.
struct TrainConfig {
  int imagination_horizon = 16;
  double lambda = 0.95;
  double actor_lr = 0.1;
  double critic_lr = 0.1;
  double entropy_coeff = 0.01;
  int updates = 1000;
  int batch = 16;
  std::uint64_t seed = 0;

  void validate() const;
};

// A strategy plus its (possibly still empty) policy and critic tables. For
// Agnostic, d is the deployment delay; its tables are trained undelayed.
struct ActorSpec {
  StrategyKind strategy = StrategyKind::Extended;
  int d = 0;
  KeyedPolicy policy;
  KeyedCritic critic;
  TrainConfig config;

  void validate() const;
};

// Fresh actor with empty tables: uniform policy, zero critic.
ActorSpec make_actor(StrategyKind strategy, int d, int n_actions, TrainConfig config = {});

Json to_json(const ActorSpec& spec);
ActorSpec actor_from_json(const Json& doc);

// ---------------------------------------------------------------------------
// Exact solvers.

struct ExtendedSolution {
  ExtendedSpace space;
  TabularMdp extended_mdp;
  PolicyTable policy;  // over extended states
  ValueFunction values;
  double start_value = 0.0;  // at (initial state, all-zero queue)
};

// Optimal policy over extended states via value iteration on the reduction.
ExtendedSolution solve_extended_optimal(const TabularMdp& mdp, int d,
                                        const DpOptions& options = {});

struct MemorylessSolution {
  PolicyTable base_policy;  // over base states, deterministic
  double start_value = 0.0;
};

// Best deterministic policy that sees only the d-step-old state: exhaustive
// search over all |A|^|S| maps, each lifted to ignore the queue and scored
// exactly on the extended process.
MemorylessSolution solve_memoryless_optimal(const TabularMdp& mdp, int d,
                                            std::int64_t max_policies = 100000,
                                            const DpOptions& options = {});

// Trained table policy of an exact extended solution (one-hot rows encoded as
// a sharply peaked softmax), usable wherever a trained actor is.
ActorSpec materialize_extended_policy(const ExtendedSolution& solution);

// ---------------------------------------------------------------------------
// Acting.

// Expected-prediction propagation: one predict_belief step per queued action.
WorldModelState propagate_deterministic(const TabularWorldModel& model, WorldModelState state,
                                        const std::vector<int>& queue);

// Sampled propagation: one imagine_step per queued action (observations drawn
// and conditioned on along the way).
WorldModelState propagate_sampled(const TabularWorldModel& model, WorldModelState state,
                                  const std::vector<int>& queue, Rng& rng);

// Latent-style action choice: propagate the delayed belief through the queue
// (mode per strategy; Agnostic uses the deterministic mode), then draw from
// the base policy at the predicted belief. Queue length must equal spec.d.
int latent_act(const ActorSpec& spec, const TabularWorldModel& model,
               const WorldModelState& m_delayed, const std::vector<int>& queue, Rng& rng);

// Action choice of any strategy from (delayed belief, pending queue).
int act(const ActorSpec& spec, const TabularWorldModel& model, const WorldModelState& m_delayed,
        const std::vector<int>& queue, Rng& rng);

// Agent for delayed_rollout: filters arriving delayed observations through
// the model and defers to act(). One callback per episode; it accumulates
// filter state across steps.
AgentCallback make_agent_callback(const ActorSpec& spec, const TabularWorldModel& model,
                                  Rng& rng);

// ---------------------------------------------------------------------------
// Training in imagination.

// Uniform-random-action episodes, realigned into a replay buffer. Episode e
// draws its stream from mix_seed(seed, e).
ReplayBuffer collect_random_episodes(const TabularPomdp& pomdp, int d, int episodes, int horizon,
                                     std::uint64_t seed);

// Actor-critic trained on imagined rollouts from replayed start points.
// Start points are the buffer's filtered (delayed belief, action window)
// pairs; rollouts advance the model by the queue-front action while the actor
// appends fresh decisions at the back. The critic regresses lambda-returns of
// belief values; the actor follows the policy gradient with the critic
// baseline and an entropy bonus. For Extended, rollouts run d steps longer
// and each decision is paired with the return from the step where it is
// resolved (the last d steps feed the critic only). Deterministic given
// cfg.seed. Agnostic trains on an undelayed buffer regardless of spec.d.
ActorSpec train_actor_critic_imagination(const TabularWorldModel& model, const ActorSpec& spec,
                                         const ReplayBuffer& buffer, const TrainConfig& cfg);

struct EvalResult {
  double mean = 0.0;
  double std_error = 0.0;
  int episodes = 0;
};

// Mean and standard error of the discounted true-reward return over seeded
// delayed rollouts. Episode e uses mix_seed(seed, e); warm-up actions are all
// zeros, matching the extended reduction's start convention. The model is
// used for belief filtering and latent propagation.
EvalResult evaluate_actor(const TabularPomdp& pomdp, const DelaySchedule& schedule,
                          const ActorSpec& spec, const TabularWorldModel& model, int episodes,
                          int horizon, std::uint64_t seed);

// Same, filtering with the exact model of the environment being evaluated.
EvalResult evaluate_actor(const TabularPomdp& pomdp, const DelaySchedule& schedule,
                          const ActorSpec& spec, int episodes, int horizon, std::uint64_t seed);

struct PipelineResult {
  ActorSpec actor;
  EvalResult evaluation;
};

// Delay-agnostic pipeline: collect undelayed random episodes, train with no
// delay knowledge, then evaluate behind delay d with deterministic latent
// propagation.
PipelineResult agnostic_pipeline(const TabularPomdp& pomdp, int d, const TrainConfig& cfg,
                                 int collect_episodes = 64, int collect_horizon = 32,
                                 int eval_episodes = 200, int eval_horizon = 60);

// Exact start value of a trained actor on a fully observed MDP: the keyed
// policy is lifted onto the extended state space (beliefs there are one-hot,
// so table keys coincide with the keys seen in training) and evaluated by
// dynamic programming. LatentSampled has no deterministic lift and is
// rejected.
double exact_actor_value(const TabularMdp& mdp, const ActorSpec& spec,
                         const DpOptions& options = {});

}  // namespace dwm
