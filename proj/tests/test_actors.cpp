#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "dwm/actors.hpp"
#include "dwm/envs.hpp"

using namespace dwm;

namespace {

TabularPomdp bandit_pomdp() {
  // One state, two actions: action 0 pays 1, action 1 pays 0.
  MdpBuilder builder(1, 2, 0.9, 0);
  builder.add(0, 0, 0, 1.0, 1.0);
  builder.add(0, 1, 0, 0.0, 1.0);
  return as_fully_observed(builder.build());
}

Eigen::MatrixXd q_values(const TabularMdp& mdp, const ValueFunction& values) {
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(mdp.n_states(), mdp.n_actions());
  for (int s = 0; s < mdp.n_states(); ++s)
    for (int a = 0; a < mdp.n_actions(); ++a)
      for (const Outcome& o : mdp.outcomes(s, a))
        q(s, a) += o.probability * (o.reward + mdp.gamma() * values[o.next_state]);
  return q;
}

double median5(std::vector<double> v) {
  REQUIRE(v.size() == 5);
  std::sort(v.begin(), v.end());
  return v[2];
}

}  // namespace

TEST_CASE("strategy names round-trip") {
  for (StrategyKind kind :
       {StrategyKind::Extended, StrategyKind::Memoryless, StrategyKind::LatentDeterministic,
        StrategyKind::LatentSampled, StrategyKind::Agnostic})
    CHECK(strategy_from_name(strategy_name(kind)) == kind);
  CHECK(strategy_name(StrategyKind::Extended) == "extended");
  CHECK(strategy_name(StrategyKind::LatentDeterministic) == "latent_deterministic");
  CHECK_THROWS_AS(strategy_from_name("qmdp"), ValidationError);
}

TEST_CASE("keyed tables default to uniform policy and zero value") {
  KeyedPolicy policy;
  policy.n_actions = 4;
  const Eigen::VectorXd p = policy.probabilities("unseen");
  for (int a = 0; a < 4; ++a) CHECK(p[a] == 0.25);

  policy.logits["x"] = Eigen::Vector2d(std::log(3.0), 0.0).eval();
  // n_actions disagreement with a stored row is the caller's bug; here the
  // row itself defines the softmax.
  policy.n_actions = 2;
  const Eigen::VectorXd q = policy.probabilities("x");
  CHECK(std::abs(q[0] - 0.75) < 1e-12);
  CHECK(std::abs(q[1] - 0.25) < 1e-12);
  CHECK(std::abs(q.sum() - 1.0) < 1e-12);

  KeyedCritic critic;
  critic.table["x"] = 2.5;
  CHECK(critic.value("x") == 2.5);
  CHECK(critic.value("unseen") == 0.0);
}

TEST_CASE("belief and extended keys quantize stably") {
  const WorldModelState a{Eigen::Vector3d(0.5, 0.5, 0.0)};
  const WorldModelState b{Eigen::Vector3d(0.5, 0.5, -0.0)};
  CHECK(belief_key(a) == belief_key(b));
  CHECK(belief_key(a) == "0.500000000000,0.500000000000,0.000000000000");
  CHECK(extended_key(a, {1, 0}) == belief_key(a) + "#1,0");
  CHECK(extended_key(a, {}) == belief_key(a) + "#");
}

TEST_CASE("config and spec validation") {
  TrainConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.imagination_horizon = 0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg = TrainConfig{};
  cfg.lambda = 1.5;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg = TrainConfig{};
  cfg.actor_lr = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg = TrainConfig{};
  cfg.batch = 0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);

  CHECK_THROWS_AS(make_actor(StrategyKind::Extended, -1, 2), ValidationError);
  CHECK_THROWS_AS(make_actor(StrategyKind::Extended, 0, 0), ValidationError);
}

TEST_CASE("extended solver matches undelayed planning at d = 0") {
  for (std::uint64_t seed : {3u, 4u}) {
    const TabularMdp mdp = random_instance(seed, 4, 3, 4, 0.3).mdp();
    const ExtendedSolution solution = solve_extended_optimal(mdp, 0);
    const ValueIterationResult vi = value_iteration(mdp);
    CHECK(std::abs(solution.start_value - vi.values[mdp.initial_state()]) < 1e-9);
  }
}

TEST_CASE("extended solver recovers the one-step-delay closed form") {
  const TabularMdp mdp = fig2_mdp({0.5, 0.9});
  const ExtendedSolution solution = solve_extended_optimal(mdp, 1);
  CHECK(std::abs(solution.start_value - 1.8181818181818181) < 1e-9);
  // The optimal first move from (s1, queue [a1]) keeps taking a1.
  CHECK(solution.policy.action(solution.extended_mdp.initial_state()) == 0);

  // A deterministic loop loses nothing to delay.
  const TabularMdp det = fig2_mdp({0.0, 0.9});
  CHECK(std::abs(solve_extended_optimal(det, 1).start_value -
                 value_iteration(det).values[0]) < 1e-9);
}

TEST_CASE("memoryless solver equals the optimum at d = 0 and is capped") {
  const TabularMdp mdp = fig2_mdp({0.5, 0.9});
  const MemorylessSolution solution = solve_memoryless_optimal(mdp, 0);
  CHECK(std::abs(solution.start_value - 5.5) < 1e-8);

  for (std::uint64_t seed : {5u, 6u}) {
    const TabularMdp instance = random_instance(seed, 3, 2, 3, 0.3).mdp();
    CHECK(std::abs(solve_memoryless_optimal(instance, 0).start_value -
                   value_iteration(instance).values[instance.initial_state()]) < 1e-8);
  }

  MdpBuilder big(10, 4, 0.9, 0);
  for (int s = 0; s < 10; ++s)
    for (int a = 0; a < 4; ++a) big.add(s, a, s, 0.0, 1.0);
  CHECK_THROWS_AS(solve_memoryless_optimal(big.build(), 1), EnumerationGuardError);
}

TEST_CASE("policy classes nest and delay never helps") {
  for (std::uint64_t seed : {21u, 22u, 23u, 24u}) {
    const TabularMdp mdp = random_instance(seed, 4, 3, 4, 0.4).mdp();
    double previous = std::numeric_limits<double>::infinity();
    for (int d : {0, 1, 2, 3}) {
      const ExtendedSolution extended = solve_extended_optimal(mdp, d);
      const MemorylessSolution memoryless = solve_memoryless_optimal(mdp, d);
      const ValueFunction uniform_values = policy_evaluation(
          extended.extended_mdp,
          PolicyTable::uniform(extended.extended_mdp.n_states(), mdp.n_actions()));
      const double uniform_value = uniform_values[extended.extended_mdp.initial_state()];
      CHECK(extended.start_value >= memoryless.start_value - 1e-8);
      CHECK(memoryless.start_value >= uniform_value - 1e-8);
      CHECK(extended.start_value <= previous + 1e-8);
      previous = extended.start_value;
    }
  }
}

TEST_CASE("greedy planning on propagated beliefs attains the extended optimum here") {
  for (double delta : {0.0, 0.25, 0.5}) {
    for (int d : {1, 2}) {
      const TabularMdp mdp = fig2_mdp({delta, 0.9});
      const ExtendedSolution solution = solve_extended_optimal(mdp, d);
      const Eigen::MatrixXd q = q_values(mdp, value_iteration(mdp).values);
      const TabularWorldModel model = TabularWorldModel::exact(as_fully_observed(mdp));

      std::vector<int> greedy(static_cast<std::size_t>(solution.extended_mdp.n_states()));
      for (int x = 0; x < solution.extended_mdp.n_states(); ++x) {
        const WorldModelState propagated = propagate_deterministic(
            model, WorldModelState::one_hot(mdp.n_states(), solution.space.base_state(x)),
            solution.space.queue(x));
        Eigen::Index best = 0;
        (q.transpose() * propagated.belief).maxCoeff(&best);
        greedy[static_cast<std::size_t>(x)] = static_cast<int>(best);
      }
      const ValueFunction values = policy_evaluation(
          solution.extended_mdp, PolicyTable::from_actions(greedy, mdp.n_actions()));
      CHECK(std::abs(values[solution.extended_mdp.initial_state()] - solution.start_value) <
            1e-8);
    }
  }
}

TEST_CASE("latent propagation modes and the act dispatcher") {
  const TabularMdp mdp = fig2_mdp({0.5, 0.9});
  const TabularWorldModel model = TabularWorldModel::exact(as_fully_observed(mdp));
  const WorldModelState s1 = WorldModelState::one_hot(3, 0);

  const WorldModelState propagated = propagate_deterministic(model, s1, {0});
  CHECK(std::abs(propagated.belief[0] - 0.5) < 1e-15);
  CHECK(std::abs(propagated.belief[1] - 0.5) < 1e-15);
  CHECK(propagated.belief[2] == 0.0);

  // With deterministic dynamics the sampled mode lands on the same belief.
  const TabularMdp det = fig2_mdp({0.0, 0.9});
  const TabularWorldModel det_model = TabularWorldModel::exact(as_fully_observed(det));
  Rng rng(7);
  CHECK(belief_key(propagate_sampled(det_model, s1, {0, 0}, rng)) ==
        belief_key(propagate_deterministic(det_model, s1, {0, 0})));

  // d = 0 latent action is exactly a base-policy draw.
  ActorSpec spec = make_actor(StrategyKind::LatentDeterministic, 0, 2);
  spec.policy.logits[belief_key(s1)] = Eigen::Vector2d(1.0, -1.0).eval();
  Rng draw_a(11), draw_b(11);
  CHECK(latent_act(spec, model, s1, {}, draw_a) ==
        spec.policy.sample(belief_key(s1), draw_b));

  CHECK_THROWS_AS(latent_act(spec, model, s1, {0}, draw_a), ValidationError);
  const ActorSpec extended = make_actor(StrategyKind::Extended, 1, 2);
  CHECK_THROWS_AS(latent_act(extended, model, s1, {0}, draw_a), ValidationError);
  CHECK_THROWS_AS(act(extended, model, s1, {}, draw_a), ValidationError);

  AgentView before_obs;
  before_obs.t = 0;
  Rng cb_rng(3);
  CHECK_THROWS_AS(make_agent_callback(extended, model, cb_rng)(before_obs), ValidationError);
}

TEST_CASE("imagination training solves a bandit for every strategy") {
  const TabularPomdp pomdp = bandit_pomdp();
  const TabularWorldModel model = TabularWorldModel::exact(pomdp);
  TrainConfig cfg;
  cfg.imagination_horizon = 8;
  cfg.updates = 500;
  cfg.batch = 8;
  cfg.seed = 42;

  const WorldModelState only = WorldModelState::one_hot(1, 0);
  for (StrategyKind kind :
       {StrategyKind::Extended, StrategyKind::Memoryless, StrategyKind::LatentDeterministic,
        StrategyKind::LatentSampled, StrategyKind::Agnostic}) {
    const int d = kind == StrategyKind::Agnostic ? 0 : 1;
    const ReplayBuffer buffer = collect_random_episodes(pomdp, kind == StrategyKind::Agnostic ? 0 : d, 24, 8, 1);
    const ActorSpec trained = train_actor_critic_imagination(
        model, make_actor(kind, d, 2), buffer, cfg);
    const std::string key = kind == StrategyKind::Extended ? extended_key(only, {0})
                                                           : belief_key(only);
    REQUIRE(trained.policy.logits.count(key) == 1);
    CHECK(trained.policy.probabilities(key)[0] > 0.9);
  }
}

TEST_CASE("trained extended and latent actors approach the delayed optimum") {
  const TabularMdp mdp = fig2_mdp({0.5, 0.9});
  const TabularPomdp pomdp = as_fully_observed(mdp);
  const TabularWorldModel model = TabularWorldModel::exact(pomdp);
  const double target = 1.8181818181818181;

  for (StrategyKind kind : {StrategyKind::Extended, StrategyKind::LatentDeterministic}) {
    std::vector<double> values;
    for (std::uint64_t seed : {1u, 2u, 3u, 4u, 5u}) {
      const ReplayBuffer buffer = collect_random_episodes(pomdp, 1, 48, 12, seed);
      TrainConfig cfg;
      cfg.updates = 1500;
      cfg.seed = seed;
      const ActorSpec trained = train_actor_critic_imagination(
          model, make_actor(kind, 1, 2), buffer, cfg);
      values.push_back(exact_actor_value(mdp, trained));
    }
    CHECK(std::abs(median5(values) - target) < 0.05 * target);
  }
}

TEST_CASE("training is bitwise reproducible per seed") {
  const TabularPomdp pomdp = as_fully_observed(fig2_mdp({0.5, 0.9}));
  const TabularWorldModel model = TabularWorldModel::exact(pomdp);
  const ReplayBuffer buffer = collect_random_episodes(pomdp, 1, 16, 10, 9);
  TrainConfig cfg;
  cfg.updates = 120;
  cfg.seed = 77;

  const ActorSpec a = train_actor_critic_imagination(
      model, make_actor(StrategyKind::Extended, 1, 2), buffer, cfg);
  const ActorSpec b = train_actor_critic_imagination(
      model, make_actor(StrategyKind::Extended, 1, 2), buffer, cfg);
  CHECK(to_json(a).dump() == to_json(b).dump());

  cfg.seed = 78;
  const ActorSpec c = train_actor_critic_imagination(
      model, make_actor(StrategyKind::Extended, 1, 2), buffer, cfg);
  CHECK(to_json(a).dump() != to_json(c).dump());
}

TEST_CASE("training rejects mismatched inputs") {
  const TabularPomdp pomdp = as_fully_observed(fig2_mdp({0.5, 0.9}));
  const TabularWorldModel model = TabularWorldModel::exact(pomdp);
  TrainConfig cfg;
  cfg.updates = 1;

  CHECK_THROWS_AS(train_actor_critic_imagination(model, make_actor(StrategyKind::Extended, 1, 2),
                                                 ReplayBuffer(1), cfg),
                  ValidationError);
  const ReplayBuffer undelayed = collect_random_episodes(pomdp, 0, 4, 6, 1);
  CHECK_THROWS_AS(train_actor_critic_imagination(model, make_actor(StrategyKind::Extended, 1, 2),
                                                 undelayed, cfg),
                  ValidationError);
  const ReplayBuffer delayed = collect_random_episodes(pomdp, 1, 4, 6, 1);
  CHECK_THROWS_AS(train_actor_critic_imagination(model, make_actor(StrategyKind::Agnostic, 1, 2),
                                                 delayed, cfg),
                  ValidationError);
  CHECK_THROWS_AS(train_actor_critic_imagination(model, make_actor(StrategyKind::Extended, 1, 3),
                                                 delayed, cfg),
                  ValidationError);

  CHECK_THROWS_AS(collect_random_episodes(pomdp, 2, 0, 6, 1), ValidationError);
  CHECK_THROWS_AS(collect_random_episodes(pomdp, 2, 4, 2, 1), ValidationError);
}

TEST_CASE("evaluation statistics: degenerate, optimal, and uniform actors") {
  // Zero-reward process: every return is exactly zero.
  MdpBuilder zero(1, 1, 0.9, 0);
  zero.add(0, 0, 0, 0.0, 1.0);
  const TabularPomdp zero_pomdp = as_fully_observed(zero.build());
  const EvalResult none = evaluate_actor(zero_pomdp, DelaySchedule::constant(0),
                                         make_actor(StrategyKind::Memoryless, 0, 1), 50, 10, 4);
  CHECK(none.mean == 0.0);
  CHECK(none.std_error == 0.0);

  const TabularMdp mdp = fig2_mdp({0.5, 0.9});
  const TabularPomdp pomdp = as_fully_observed(mdp);

  // The exact-DP extended policy, followed for 10^4 seeded episodes, lands on
  // its dynamic-programming start value within Monte-Carlo error.
  const ActorSpec optimal = materialize_extended_policy(solve_extended_optimal(mdp, 1));
  const EvalResult mc = evaluate_actor(pomdp, DelaySchedule::constant(1), optimal, 10000, 120, 12);
  CHECK(std::abs(mc.mean - 1.8181818181818181) < 3.0 * mc.std_error);

  // Same for an undelayed optimal policy on a randomly generated process.
  const TabularMdp instance = random_instance(31, 4, 3, 4, 0.4).mdp();
  const ActorSpec undelayed = materialize_extended_policy(solve_extended_optimal(instance, 0));
  const EvalResult mc0 = evaluate_actor(as_fully_observed(instance), DelaySchedule::constant(0),
                                        undelayed, 4000, 160, 13);
  CHECK(std::abs(mc0.mean - value_iteration(instance).values[instance.initial_state()]) <
        3.0 * mc0.std_error);

  // An empty-table actor is the uniform random policy.
  const ExtendedSolution frame = solve_extended_optimal(mdp, 1);
  const double uniform_value = policy_evaluation(
      frame.extended_mdp,
      PolicyTable::uniform(frame.extended_mdp.n_states(),
                           2))[frame.extended_mdp.initial_state()];
  const EvalResult mcu = evaluate_actor(pomdp, DelaySchedule::constant(1),
                                        make_actor(StrategyKind::Extended, 1, 2), 4000, 120, 14);
  CHECK(std::abs(mcu.mean - uniform_value) < 3.0 * mcu.std_error);

  CHECK_THROWS_AS(evaluate_actor(pomdp, DelaySchedule::constant(2), optimal, 10, 20, 1),
                  ValidationError);
}

TEST_CASE("delay-agnostic deployment: exact under determinism, degrading under noise") {
  TrainConfig cfg;
  cfg.updates = 600;
  cfg.seed = 5;

  // Deterministic loop: predicted beliefs are exact, so delay costs nothing.
  const TabularPomdp det = as_fully_observed(fig2_mdp({0.0, 0.9}));
  std::vector<double> means;
  for (int d : {0, 1, 2})
    means.push_back(agnostic_pipeline(det, d, cfg, 48, 16, 200, 80).evaluation.mean);
  CHECK(std::abs(means[1] - means[0]) < 0.05);
  CHECK(std::abs(means[2] - means[0]) < 0.05);

  // Noisy loop: propagated beliefs leave the keys seen in training and the
  // policy collapses to uniform, so value falls off with delay.
  const TabularPomdp noisy = as_fully_observed(fig2_mdp({0.5, 0.9}));
  double sum_d0 = 0.0, sum_d2 = 0.0;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    cfg.seed = seed;
    sum_d0 += agnostic_pipeline(noisy, 0, cfg, 48, 16, 200, 80).evaluation.mean;
    sum_d2 += agnostic_pipeline(noisy, 2, cfg, 48, 16, 200, 80).evaluation.mean;
  }
  CHECK(sum_d0 / 3.0 > sum_d2 / 3.0 + 1.0);
}

TEST_CASE("actors serialize to JSON and back unchanged") {
  const TabularPomdp pomdp = as_fully_observed(fig2_mdp({0.5, 0.9}));
  const TabularWorldModel model = TabularWorldModel::exact(pomdp);
  const ReplayBuffer buffer = collect_random_episodes(pomdp, 1, 12, 10, 2);
  TrainConfig cfg;
  cfg.updates = 80;
  cfg.seed = 3;
  const ActorSpec trained = train_actor_critic_imagination(
      model, make_actor(StrategyKind::Extended, 1, 2), buffer, cfg);

  const Json doc = to_json(trained);
  CHECK(doc.size() == 5);
  for (const char* key : {"strategy", "d", "policy", "critic", "config"}) CHECK(doc.contains(key));
  CHECK(doc["strategy"] == "extended");
  CHECK(doc["d"] == 1);

  const ActorSpec back = actor_from_json(doc);
  CHECK(to_json(back).dump() == doc.dump());
  CHECK(back.strategy == trained.strategy);
  CHECK(back.config.seed == trained.config.seed);

  Json broken = doc;
  broken.erase("critic");
  CHECK_THROWS_AS(actor_from_json(broken), ValidationError);
}
