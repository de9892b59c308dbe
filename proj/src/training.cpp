#include <cmath>
#include <span>
#include <utility>

#include "dwm/actors.hpp"

namespace dwm {

namespace {

// A decision point replayed from the buffer: the filtered belief at the
// moment an observation arrived, plus the actions already in flight.
struct StartPoint {
  WorldModelState m;
  std::vector<int> queue;
};

std::vector<StartPoint> imagination_starts(const TabularWorldModel& model,
                                           const ReplayBuffer& buffer) {
  std::vector<StartPoint> starts;
  starts.reserve(static_cast<std::size_t>(buffer.n_entries()));
  for (const ReplayEpisode& episode : buffer.episodes()) {
    WorldModelState belief = model.initial_state();
    for (std::size_t u = 0; u < episode.entries.size(); ++u) {
      const ReplayEntry& entry = episode.entries[u];
      belief = u == 0 ? model.condition_on_obs(belief, entry.obs)
                      : model.belief_update(belief, episode.entries[u - 1].action, entry.obs);
      starts.push_back(StartPoint{belief, entry.window});
    }
  }
  if (starts.empty())
    throw ValidationError("train_actor_critic_imagination: replay buffer has no entries");
  return starts;
}

struct Gradients {
  std::map<std::string, Eigen::VectorXd> actor;
  std::map<std::string, std::pair<double, int>> critic;  // (delta sum, visits)
};

}  // namespace

ActorSpec train_actor_critic_imagination(const TabularWorldModel& model, const ActorSpec& spec,
                                         const ReplayBuffer& buffer, const TrainConfig& cfg) {
  spec.validate();
  cfg.validate();
  if (spec.policy.n_actions != model.n_actions())
    throw ValidationError("train_actor_critic_imagination: actor/model action count mismatch");
  const int d = buffer.d();
  if (spec.strategy == StrategyKind::Agnostic) {
    if (d != 0)
      throw ValidationError(
          "train_actor_critic_imagination: Agnostic trains on an undelayed buffer");
  } else if (d != spec.d) {
    throw ValidationError(
        "train_actor_critic_imagination: buffer delay does not match the actor's");
  }

  const std::vector<StartPoint> starts = imagination_starts(model, buffer);
  ActorSpec trained = spec;
  trained.config = cfg;
  const double gamma = model.gamma();
  const int horizon = cfg.imagination_horizon;
  // Extended decisions resolve d steps later; its rollouts run that much
  // longer so every decision sees the return from its own resolution step.
  const int shift = spec.strategy == StrategyKind::Extended ? d : 0;
  const int total = horizon + shift;

  Rng rng(mix_seed(cfg.seed, 0));
  std::vector<std::string> decision_keys(static_cast<std::size_t>(total));
  std::vector<Eigen::VectorXd> probs(static_cast<std::size_t>(total));
  std::vector<int> chosen(static_cast<std::size_t>(total));
  std::vector<double> rewards(static_cast<std::size_t>(total));
  std::vector<std::string> value_keys(static_cast<std::size_t>(total) + 1);
  std::vector<double> values(static_cast<std::size_t>(total) + 1);
  std::vector<double> returns(static_cast<std::size_t>(total) + 1);

  for (int update = 0; update < cfg.updates; ++update) {
    Gradients grads;
    for (int b = 0; b < cfg.batch; ++b) {
      const StartPoint& start =
          starts[static_cast<std::size_t>(uniform_below(rng, static_cast<int>(starts.size())))];
      WorldModelState m = start.m;
      std::vector<int> queue = start.queue;

      for (int k = 0; k < total; ++k) {
        const std::size_t ki = static_cast<std::size_t>(k);
        value_keys[ki] = belief_key(m);
        values[ki] = trained.critic.value(value_keys[ki]);
        std::string key;
        switch (trained.strategy) {
          case StrategyKind::Extended:
            key = extended_key(m, queue);
            break;
          case StrategyKind::Memoryless:
            key = belief_key(m);
            break;
          case StrategyKind::LatentDeterministic:
          case StrategyKind::Agnostic:
            key = belief_key(propagate_deterministic(model, m, queue));
            break;
          case StrategyKind::LatentSampled:
            key = belief_key(propagate_sampled(model, m, queue, rng));
            break;
        }
        probs[ki] = trained.policy.probabilities(key);
        decision_keys[ki] = std::move(key);
        const Eigen::VectorXd& p = probs[ki];
        chosen[ki] = sample_weighted(
            std::span<const double>(p.data(), static_cast<std::size_t>(p.size())), p.sum(), rng);
        const int resolved = d > 0 ? queue.front() : chosen[ki];
        auto [next, reward] = model.imagine_step(m, resolved, rng);
        rewards[ki] = reward;
        m = std::move(next);
        if (d > 0) {
          queue.erase(queue.begin());
          queue.push_back(chosen[ki]);
        }
      }
      value_keys[static_cast<std::size_t>(total)] = belief_key(m);
      values[static_cast<std::size_t>(total)] =
          trained.critic.value(value_keys[static_cast<std::size_t>(total)]);

      // Lambda-returns bootstrapped on the critic.
      returns[static_cast<std::size_t>(total)] = values[static_cast<std::size_t>(total)];
      for (int k = total - 1; k >= 0; --k) {
        const std::size_t ki = static_cast<std::size_t>(k);
        returns[ki] = rewards[ki] + gamma * ((1.0 - cfg.lambda) * values[ki + 1] +
                                             cfg.lambda * returns[ki + 1]);
      }
      if (!std::isfinite(returns[0]))
        throw NumericalError("train_actor_critic_imagination: non-finite return");

      for (int k = 0; k < total; ++k) {
        const std::size_t ki = static_cast<std::size_t>(k);
        auto& [delta, visits] = grads.critic[value_keys[ki]];
        delta += returns[ki] - values[ki];
        ++visits;
      }
      for (int k = 0; k < horizon; ++k) {
        const std::size_t ki = static_cast<std::size_t>(k);
        const std::size_t rk = static_cast<std::size_t>(k + shift);
        const double advantage = returns[rk] - values[rk];
        const Eigen::VectorXd& p = probs[ki];
        Eigen::VectorXd g = -advantage * p;
        g[chosen[ki]] += advantage;
        // Entropy bonus: d/dz of -sum p log p for a softmax in z. The floor
        // keeps 0 * log 0 from producing NaN when a probability underflows.
        const Eigen::ArrayXd log_p = p.array().max(1e-300).log();
        const double entropy = -(p.array() * log_p).sum();
        g -= cfg.entropy_coeff * (p.array() * (log_p + entropy)).matrix();
        auto [it, inserted] =
            grads.actor.try_emplace(decision_keys[ki],
                                    Eigen::VectorXd::Zero(trained.policy.n_actions));
        it->second += g;
      }
    }

    for (const auto& [key, accum] : grads.critic) {
      const double step = cfg.critic_lr * accum.first / accum.second;
      if (!std::isfinite(step))
        throw NumericalError("train_actor_critic_imagination: non-finite critic update");
      trained.critic.table[key] += step;
    }
    for (const auto& [key, g] : grads.actor) {
      if (!g.allFinite())
        throw NumericalError("train_actor_critic_imagination: non-finite actor update");
      auto [it, inserted] =
          trained.policy.logits.try_emplace(key,
                                            Eigen::VectorXd::Zero(trained.policy.n_actions));
      it->second += (cfg.actor_lr / cfg.batch) * g;
    }
  }
  return trained;
}

ReplayBuffer collect_random_episodes(const TabularPomdp& pomdp, int d, int episodes, int horizon,
                                     std::uint64_t seed) {
  if (episodes < 1) throw ValidationError("collect_random_episodes: episodes must be positive");
  if (horizon <= d)
    throw ValidationError("collect_random_episodes: horizon must exceed the delay");
  ReplayBuffer buffer(d);
  const DelaySchedule schedule = DelaySchedule::constant(d);
  const int n_actions = pomdp.mdp().n_actions();
  for (int e = 0; e < episodes; ++e) {
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(e)));
    const AgentCallback random_agent = [&](const AgentView&) {
      return uniform_below(rng, n_actions);
    };
    buffer.add(shift_back(delayed_rollout(pomdp, schedule, random_agent, horizon, rng)));
  }
  return buffer;
}

EvalResult evaluate_actor(const TabularPomdp& pomdp, const DelaySchedule& schedule,
                          const ActorSpec& spec, const TabularWorldModel& model, int episodes,
                          int horizon, std::uint64_t seed) {
  schedule.validate();
  spec.validate();
  if (episodes < 1) throw ValidationError("evaluate_actor: episodes must be positive");
  if (schedule.delay != spec.d)
    throw ValidationError("evaluate_actor: schedule delay does not match the actor's");
  const double gamma = pomdp.mdp().gamma();
  const std::vector<int> warmup(static_cast<std::size_t>(schedule.delay), 0);

  double sum = 0.0;
  double sum_sq = 0.0;
  for (int e = 0; e < episodes; ++e) {
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(e)));
    const AgentCallback agent = make_agent_callback(spec, model, rng);
    const DelayedTrajectory traj = delayed_rollout(pomdp, schedule, agent, horizon, rng, warmup);
    double episode_return = 0.0;
    double discount = 1.0;
    for (const DelayedStep& step : traj.steps) {
      episode_return += discount * step.hidden_reward;
      discount *= gamma;
    }
    sum += episode_return;
    sum_sq += episode_return * episode_return;
  }
  EvalResult result;
  result.episodes = episodes;
  result.mean = sum / episodes;
  if (episodes > 1) {
    const double variance =
        std::max(0.0, (sum_sq - episodes * result.mean * result.mean) / (episodes - 1));
    result.std_error = std::sqrt(variance / episodes);
  }
  return result;
}

EvalResult evaluate_actor(const TabularPomdp& pomdp, const DelaySchedule& schedule,
                          const ActorSpec& spec, int episodes, int horizon, std::uint64_t seed) {
  return evaluate_actor(pomdp, schedule, spec, TabularWorldModel::exact(pomdp), episodes,
                        horizon, seed);
}

PipelineResult agnostic_pipeline(const TabularPomdp& pomdp, int d, const TrainConfig& cfg,
                                 int collect_episodes, int collect_horizon, int eval_episodes,
                                 int eval_horizon) {
  if (d < 0) throw ValidationError("agnostic_pipeline: d must be nonnegative");
  const TabularWorldModel model = TabularWorldModel::exact(pomdp);
  const ReplayBuffer buffer =
      collect_random_episodes(pomdp, 0, collect_episodes, collect_horizon, cfg.seed);
  const ActorSpec fresh = make_actor(StrategyKind::Agnostic, d, pomdp.mdp().n_actions(), cfg);
  PipelineResult result{train_actor_critic_imagination(model, fresh, buffer, cfg), {}};
  result.evaluation = evaluate_actor(pomdp, DelaySchedule::constant(d), result.actor, model,
                                     eval_episodes, eval_horizon, mix_seed(cfg.seed, 0x5eed));
  return result;
}

}  // namespace dwm
