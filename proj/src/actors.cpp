#include "dwm/actors.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <memory>
#include <span>
#include <utility>

namespace dwm {

std::string strategy_name(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::Extended:
      return "extended";
    case StrategyKind::Memoryless:
      return "memoryless";
    case StrategyKind::LatentDeterministic:
      return "latent_deterministic";
    case StrategyKind::LatentSampled:
      return "latent_sampled";
    case StrategyKind::Agnostic:
      return "agnostic";
  }
  throw ValidationError("strategy_name: unknown strategy");
}

StrategyKind strategy_from_name(const std::string& name) {
  for (StrategyKind kind :
       {StrategyKind::Extended, StrategyKind::Memoryless, StrategyKind::LatentDeterministic,
        StrategyKind::LatentSampled, StrategyKind::Agnostic})
    if (strategy_name(kind) == name) return kind;
  throw ValidationError("strategy_from_name: unknown strategy '" + name + "'");
}

std::string belief_key(const WorldModelState& state) {
  std::string key;
  key.reserve(static_cast<std::size_t>(state.belief.size()) * 15);
  char digits[32];
  for (Eigen::Index i = 0; i < state.belief.size(); ++i) {
    if (i > 0) key.push_back(',');
    // + 0.0 folds negative zero so quantized keys are sign-stable.
    std::snprintf(digits, sizeof(digits), "%.12f", state.belief[i] + 0.0);
    key += digits;
  }
  return key;
}

std::string extended_key(const WorldModelState& state, const std::vector<int>& queue) {
  std::string key = belief_key(state);
  key.push_back('#');
  for (std::size_t i = 0; i < queue.size(); ++i) {
    if (i > 0) key.push_back(',');
    key += std::to_string(queue[i]);
  }
  return key;
}

Eigen::VectorXd KeyedPolicy::probabilities(const std::string& key) const {
  if (n_actions < 1) throw ValidationError("KeyedPolicy: n_actions must be positive");
  auto it = logits.find(key);
  if (it == logits.end())
    return Eigen::VectorXd::Constant(n_actions, 1.0 / n_actions);
  const Eigen::VectorXd& z = it->second;
  Eigen::VectorXd p = (z.array() - z.maxCoeff()).exp();
  return p / p.sum();
}

int KeyedPolicy::sample(const std::string& key, Rng& rng) const {
  const Eigen::VectorXd p = probabilities(key);
  return sample_weighted(std::span<const double>(p.data(), static_cast<std::size_t>(p.size())),
                         p.sum(), rng);
}

double KeyedCritic::value(const std::string& key) const {
  auto it = table.find(key);
  return it == table.end() ? 0.0 : it->second;
}

void TrainConfig::validate() const {
  if (imagination_horizon < 1)
    throw ValidationError("TrainConfig: imagination_horizon must be at least 1");
  if (!(lambda >= 0.0 && lambda <= 1.0))
    throw ValidationError("TrainConfig: lambda must lie in [0, 1]");
  if (!(actor_lr > 0.0) || !(critic_lr > 0.0))
    throw ValidationError("TrainConfig: learning rates must be positive");
  if (!(entropy_coeff >= 0.0))
    throw ValidationError("TrainConfig: entropy_coeff must be nonnegative");
  if (updates < 1) throw ValidationError("TrainConfig: updates must be at least 1");
  if (batch < 1) throw ValidationError("TrainConfig: batch must be at least 1");
}

void ActorSpec::validate() const {
  if (d < 0) throw ValidationError("ActorSpec: d must be nonnegative");
  if (policy.n_actions < 1) throw ValidationError("ActorSpec: policy needs a positive n_actions");
  config.validate();
}

ActorSpec make_actor(StrategyKind strategy, int d, int n_actions, TrainConfig config) {
  ActorSpec spec;
  spec.strategy = strategy;
  spec.d = d;
  spec.policy.n_actions = n_actions;
  spec.config = config;
  spec.validate();
  return spec;
}

Json to_json(const ActorSpec& spec) {
  Json policy_table = Json::object();
  for (const auto& [key, z] : spec.policy.logits)
    policy_table[key] = std::vector<double>(z.data(), z.data() + z.size());
  Json critic_table = Json::object();
  for (const auto& [key, v] : spec.critic.table) critic_table[key] = v;

  Json doc;
  doc["strategy"] = strategy_name(spec.strategy);
  doc["d"] = spec.d;
  doc["policy"] = Json{{"n_actions", spec.policy.n_actions}, {"table", policy_table}};
  doc["critic"] = Json{{"table", critic_table}};
  doc["config"] = Json{{"imagination_horizon", spec.config.imagination_horizon},
                       {"lambda", spec.config.lambda},
                       {"actor_lr", spec.config.actor_lr},
                       {"critic_lr", spec.config.critic_lr},
                       {"entropy_coeff", spec.config.entropy_coeff},
                       {"updates", spec.config.updates},
                       {"batch", spec.config.batch},
                       {"seed", spec.config.seed}};
  return doc;
}

ActorSpec actor_from_json(const Json& doc) {
  if (!doc.is_object()) throw ValidationError("actor JSON: document must be an object");
  for (const char* key : {"strategy", "d", "policy", "critic", "config"})
    if (!doc.contains(key)) throw ValidationError(std::string("actor JSON: missing field ") + key);

  ActorSpec spec;
  spec.strategy = strategy_from_name(doc["strategy"].get<std::string>());
  spec.d = doc["d"].get<int>();

  const Json& policy = doc["policy"];
  spec.policy.n_actions = policy.at("n_actions").get<int>();
  for (const auto& [key, row] : policy.at("table").items()) {
    const auto values = row.get<std::vector<double>>();
    if (static_cast<int>(values.size()) != spec.policy.n_actions)
      throw ValidationError("actor JSON: policy row length does not match n_actions");
    spec.policy.logits[key] =
        Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
  }
  for (const auto& [key, v] : doc["critic"].at("table").items())
    spec.critic.table[key] = v.get<double>();

  const Json& config = doc["config"];
  spec.config.imagination_horizon = config.at("imagination_horizon").get<int>();
  spec.config.lambda = config.at("lambda").get<double>();
  spec.config.actor_lr = config.at("actor_lr").get<double>();
  spec.config.critic_lr = config.at("critic_lr").get<double>();
  spec.config.entropy_coeff = config.at("entropy_coeff").get<double>();
  spec.config.updates = config.at("updates").get<int>();
  spec.config.batch = config.at("batch").get<int>();
  spec.config.seed = config.at("seed").get<std::uint64_t>();

  spec.validate();
  return spec;
}

// ---------------------------------------------------------------------------
// Exact solvers.

ExtendedSolution solve_extended_optimal(const TabularMdp& mdp, int d, const DpOptions& options) {
  ExtendedSpace space(mdp.n_states(), mdp.n_actions(), d);
  TabularMdp extended = extend_mdp(mdp, d);
  ValueIterationResult vi = value_iteration(extended, options);
  const double start = vi.values[extended.initial_state()];
  return ExtendedSolution{space, std::move(extended), std::move(vi.policy),
                          std::move(vi.values), start};
}

MemorylessSolution solve_memoryless_optimal(const TabularMdp& mdp, int d,
                                            std::int64_t max_policies,
                                            const DpOptions& options) {
  const int n_states = mdp.n_states();
  const int n_actions = mdp.n_actions();
  double combinations = 1.0;
  for (int s = 0; s < n_states; ++s) combinations *= n_actions;
  if (combinations > static_cast<double>(max_policies))
    throw EnumerationGuardError("solve_memoryless_optimal: |A|^|S| = " +
                                std::to_string(combinations) + " exceeds the cap of " +
                                std::to_string(max_policies));

  ExtendedSpace space(n_states, n_actions, d);
  TabularMdp extended = extend_mdp(mdp, d);

  std::vector<int> assignment(n_states, 0);
  std::vector<int> best_assignment(n_states, 0);
  double best_value = -std::numeric_limits<double>::infinity();
  bool done = false;
  while (!done) {
    // Lift the map to the extended process: the queue is ignored, the action
    // depends only on the base (d-step-old) state component.
    std::vector<int> lifted(extended.n_states());
    for (int x = 0; x < extended.n_states(); ++x) lifted[x] = assignment[space.base_state(x)];
    const ValueFunction values =
        policy_evaluation(extended, PolicyTable::from_actions(lifted, n_actions), options);
    const double value = values[extended.initial_state()];
    if (value > best_value) {
      best_value = value;
      best_assignment = assignment;
    }
    // Odometer increment over the |A|^|S| assignments.
    done = true;
    for (int s = 0; s < n_states; ++s) {
      if (++assignment[s] < n_actions) {
        done = false;
        break;
      }
      assignment[s] = 0;
    }
  }
  return MemorylessSolution{PolicyTable::from_actions(best_assignment, n_actions), best_value};
}

ActorSpec materialize_extended_policy(const ExtendedSolution& solution) {
  // A logit gap of 40 puts all but ~1e-17 of the mass on the chosen action,
  // which is below sampling resolution: the table acts deterministically.
  constexpr double kSharpLogit = 40.0;
  const ExtendedSpace& space = solution.space;
  ActorSpec spec = make_actor(StrategyKind::Extended, space.d(), space.n_actions());
  for (int x = 0; x < space.n_states(); ++x) {
    const WorldModelState base = WorldModelState::one_hot(space.n_base_states(),
                                                          space.base_state(x));
    Eigen::VectorXd z = Eigen::VectorXd::Zero(space.n_actions());
    z[solution.policy.action(x)] = kSharpLogit;
    spec.policy.logits[extended_key(base, space.queue(x))] = std::move(z);
  }
  const std::vector<int> zeros(static_cast<std::size_t>(space.d()), 0);
  for (int s = 0; s < space.n_base_states(); ++s)
    spec.critic.table[belief_key(WorldModelState::one_hot(space.n_base_states(), s))] =
        solution.values[space.encode(s, zeros)];
  return spec;
}

// ---------------------------------------------------------------------------
// Acting.

WorldModelState propagate_deterministic(const TabularWorldModel& model, WorldModelState state,
                                        const std::vector<int>& queue) {
  for (int action : queue) state = model.predict_belief(state, action);
  return state;
}

WorldModelState propagate_sampled(const TabularWorldModel& model, WorldModelState state,
                                  const std::vector<int>& queue, Rng& rng) {
  for (int action : queue) state = model.imagine_step(state, action, rng).first;
  return state;
}

namespace {

// Actor-table key of a decision point, per strategy. Latent strategies key on
// the propagated belief so the table rows seen when acting are exactly the
// rows seen in training.
std::string decision_key(const ActorSpec& spec, const TabularWorldModel& model,
                         const WorldModelState& m_delayed, const std::vector<int>& queue,
                         Rng& rng) {
  switch (spec.strategy) {
    case StrategyKind::Extended:
      return extended_key(m_delayed, queue);
    case StrategyKind::Memoryless:
      return belief_key(m_delayed);
    case StrategyKind::LatentDeterministic:
    case StrategyKind::Agnostic:
      return belief_key(propagate_deterministic(model, m_delayed, queue));
    case StrategyKind::LatentSampled:
      return belief_key(propagate_sampled(model, m_delayed, queue, rng));
  }
  throw ValidationError("decision_key: unknown strategy");
}

}  // namespace

int latent_act(const ActorSpec& spec, const TabularWorldModel& model,
               const WorldModelState& m_delayed, const std::vector<int>& queue, Rng& rng) {
  if (spec.strategy != StrategyKind::LatentDeterministic &&
      spec.strategy != StrategyKind::LatentSampled && spec.strategy != StrategyKind::Agnostic)
    throw ValidationError("latent_act: spec strategy has no latent propagation mode");
  if (static_cast<int>(queue.size()) != spec.d)
    throw ValidationError("latent_act: queue length must equal the delay");
  return spec.policy.sample(decision_key(spec, model, m_delayed, queue, rng), rng);
}

int act(const ActorSpec& spec, const TabularWorldModel& model, const WorldModelState& m_delayed,
        const std::vector<int>& queue, Rng& rng) {
  if (static_cast<int>(queue.size()) != spec.d)
    throw ValidationError("act: queue length must equal the delay");
  return spec.policy.sample(decision_key(spec, model, m_delayed, queue, rng), rng);
}

AgentCallback make_agent_callback(const ActorSpec& spec, const TabularWorldModel& model,
                                  Rng& rng) {
  struct FilterState {
    std::optional<WorldModelState> belief;  // delayed belief m_{t-d}
    std::vector<int> actions;               // a_0 .. a_{t-1}
  };
  auto state = std::make_shared<FilterState>();
  return [spec, &model, &rng, state](const AgentView& view) {
    if (!view.obs)
      throw ValidationError("actor callback: consulted before any observation arrived");
    const int k = view.t - spec.d;  // realigned index of the arriving observation
    if (!state->belief) {
      state->actions = view.queue;  // warm-up actions we did not choose
      state->belief = model.condition_on_obs(model.initial_state(), *view.obs);
    } else {
      state->belief =
          model.belief_update(*state->belief, state->actions[static_cast<std::size_t>(k - 1)],
                              *view.obs);
    }
    const int action = act(spec, model, *state->belief, view.queue, rng);
    state->actions.push_back(action);
    return action;
  };
}

// ---------------------------------------------------------------------------
// Exact evaluation of a keyed policy on a fully observed process.

double exact_actor_value(const TabularMdp& mdp, const ActorSpec& spec, const DpOptions& options) {
  if (spec.strategy == StrategyKind::LatentSampled)
    throw ValidationError("exact_actor_value: sampled propagation has no deterministic lift");
  const TabularWorldModel model = TabularWorldModel::exact(as_fully_observed(mdp));
  ExtendedSpace space(mdp.n_states(), mdp.n_actions(), spec.d);
  TabularMdp extended = extend_mdp(mdp, spec.d);

  Rng unused(0);  // decision_key never samples for the strategies allowed here
  Eigen::MatrixXd rows(extended.n_states(), mdp.n_actions());
  for (int x = 0; x < extended.n_states(); ++x) {
    const WorldModelState base =
        WorldModelState::one_hot(mdp.n_states(), space.base_state(x));
    rows.row(x) =
        spec.policy.probabilities(decision_key(spec, model, base, space.queue(x), unused))
            .transpose();
  }
  const ValueFunction values =
      policy_evaluation(extended, PolicyTable(std::move(rows), false), options);
  return values[extended.initial_state()];
}

}  // namespace dwm
