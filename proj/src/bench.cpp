#include "dwm/bench.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "dwm/dp.hpp"
#include "dwm/rng.hpp"

namespace dwm {

namespace {

constexpr double kSharpLogit = 40.0;  // softmax(40, 0) is one-hot to ~4e-18

void reject_unknown_keys(const Json& obj, const std::vector<std::string>& allowed,
                         const std::string& where) {
  for (const auto& [key, value] : obj.items())
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw ValidationError(where + ": unknown field " + key);
}

double real_param(const Json& params, const std::string& key, double fallback) {
  if (!params.contains(key)) return fallback;
  const Json& v = params.at(key);
  if (!v.is_number()) throw ValidationError("environment parameters: " + key + " must be a number");
  return v.get<double>();
}

int int_param(const Json& params, const std::string& key, int fallback) {
  if (!params.contains(key)) return fallback;
  const Json& v = params.at(key);
  if (!v.is_number_integer())
    throw ValidationError("environment parameters: " + key + " must be an integer");
  return v.get<int>();
}

}  // namespace

BenchEnv make_bench_env(const std::string& name, const Json& params) {
  if (!params.is_object()) throw ValidationError("environment parameters: must be a JSON object");
  if (name == "fig2") {
    reject_unknown_keys(params, {"delta", "gamma"}, "fig2 parameters");
    Fig2Params p;
    p.delta = real_param(params, "delta", p.delta);
    p.gamma = real_param(params, "gamma", p.gamma);
    return BenchEnv{as_fully_observed(fig2_mdp(p)), true};
  }
  if (name == "velocity_chain" || name == "masked_chain") {
    const bool masked = name == "masked_chain";
    std::vector<std::string> allowed = {"n_positions", "flip_prob", "gamma"};
    if (masked) allowed.push_back("rho");
    reject_unknown_keys(params, allowed, name + " parameters");
    VelocityChainParams p;
    p.n_positions = int_param(params, "n_positions", p.n_positions);
    p.flip_prob = real_param(params, "flip_prob", p.flip_prob);
    p.gamma = real_param(params, "gamma", p.gamma);
    FactoredMdp chain = velocity_chain(p);
    if (!masked) return BenchEnv{as_fully_observed(chain.mdp), true};
    MaskedObsConfig mask;
    mask.rho = real_param(params, "rho", mask.rho);
    return BenchEnv{masked_pomdp(chain, mask), false};
  }
  if (name == "random") {
    reject_unknown_keys(params, {"seed", "n_states", "n_actions", "n_obs", "sparsity"},
                        "random parameters");
    const auto seed = static_cast<std::uint64_t>(int_param(params, "seed", 1));
    const int n_states = int_param(params, "n_states", 3);
    const int n_actions = int_param(params, "n_actions", 2);
    const int n_obs = int_param(params, "n_obs", 3);
    const double sparsity = real_param(params, "sparsity", 0.3);
    return BenchEnv{random_instance(seed, n_states, n_actions, n_obs, sparsity), false};
  }
  throw ValidationError("unknown environment: " + name);
}

void ExperimentConfig::validate() const {
  if (delays.empty()) throw ValidationError("experiment config: delays must be nonempty");
  for (int d : delays)
    if (d < 0) throw ValidationError("experiment config: delays must be nonnegative");
  if (strategies.empty()) throw ValidationError("experiment config: strategies must be nonempty");
  if (seeds.empty()) throw ValidationError("experiment config: seeds must be nonempty");
  if (episodes < 1) throw ValidationError("experiment config: episodes must be positive");
  if (horizon < 1) throw ValidationError("experiment config: horizon must be positive");
  if (solver != "train" && solver != "dp")
    throw ValidationError("experiment config: solver must be \"train\" or \"dp\"");
  if (collect_episodes < 1)
    throw ValidationError("experiment config: collect_episodes must be positive");
  if (collect_horizon < 1)
    throw ValidationError("experiment config: collect_horizon must be positive");
  if (format != "csv" && format != "json")
    throw ValidationError("experiment config: format must be \"csv\" or \"json\"");
  train.validate();
}

Json to_json(const ExperimentConfig& cfg) {
  std::vector<std::string> strategy_names;
  strategy_names.reserve(cfg.strategies.size());
  for (StrategyKind k : cfg.strategies) strategy_names.push_back(strategy_name(k));
  Json doc;
  doc["env"] = cfg.env;
  doc["env_params"] = cfg.env_params;
  doc["delays"] = cfg.delays;
  doc["strategies"] = strategy_names;
  doc["seeds"] = cfg.seeds;
  doc["episodes"] = cfg.episodes;
  doc["horizon"] = cfg.horizon;
  doc["solver"] = cfg.solver;
  doc["train"] = Json{{"imagination_horizon", cfg.train.imagination_horizon},
                      {"lambda", cfg.train.lambda},
                      {"actor_lr", cfg.train.actor_lr},
                      {"critic_lr", cfg.train.critic_lr},
                      {"entropy_coeff", cfg.train.entropy_coeff},
                      {"updates", cfg.train.updates},
                      {"batch", cfg.train.batch},
                      {"seed", cfg.train.seed}};
  doc["collect_episodes"] = cfg.collect_episodes;
  doc["collect_horizon"] = cfg.collect_horizon;
  doc["out"] = cfg.out;
  doc["format"] = cfg.format;
  doc["timings"] = cfg.timings;
  return doc;
}

ExperimentConfig config_from_json(const Json& doc) {
  if (!doc.is_object()) throw ValidationError("experiment config: document must be an object");
  reject_unknown_keys(doc,
                      {"env", "env_params", "delays", "strategies", "seeds", "episodes", "horizon",
                       "solver", "train", "collect_episodes", "collect_horizon", "out", "format",
                       "timings"},
                      "experiment config");
  ExperimentConfig cfg;
  if (doc.contains("env")) cfg.env = doc.at("env").get<std::string>();
  if (doc.contains("env_params")) {
    cfg.env_params = doc.at("env_params");
    if (!cfg.env_params.is_object())
      throw ValidationError("experiment config: env_params must be an object");
  }
  if (doc.contains("delays")) cfg.delays = doc.at("delays").get<std::vector<int>>();
  if (doc.contains("strategies")) {
    cfg.strategies.clear();
    for (const Json& name : doc.at("strategies"))
      cfg.strategies.push_back(strategy_from_name(name.get<std::string>()));
  }
  if (doc.contains("seeds")) cfg.seeds = doc.at("seeds").get<std::vector<std::uint64_t>>();
  if (doc.contains("episodes")) cfg.episodes = doc.at("episodes").get<int>();
  if (doc.contains("horizon")) cfg.horizon = doc.at("horizon").get<int>();
  if (doc.contains("solver")) cfg.solver = doc.at("solver").get<std::string>();
  if (doc.contains("train")) {
    const Json& train = doc.at("train");
    reject_unknown_keys(train,
                        {"imagination_horizon", "lambda", "actor_lr", "critic_lr", "entropy_coeff",
                         "updates", "batch", "seed"},
                        "experiment config train");
    if (train.contains("imagination_horizon"))
      cfg.train.imagination_horizon = train.at("imagination_horizon").get<int>();
    if (train.contains("lambda")) cfg.train.lambda = train.at("lambda").get<double>();
    if (train.contains("actor_lr")) cfg.train.actor_lr = train.at("actor_lr").get<double>();
    if (train.contains("critic_lr")) cfg.train.critic_lr = train.at("critic_lr").get<double>();
    if (train.contains("entropy_coeff"))
      cfg.train.entropy_coeff = train.at("entropy_coeff").get<double>();
    if (train.contains("updates")) cfg.train.updates = train.at("updates").get<int>();
    if (train.contains("batch")) cfg.train.batch = train.at("batch").get<int>();
    if (train.contains("seed")) cfg.train.seed = train.at("seed").get<std::uint64_t>();
  }
  if (doc.contains("collect_episodes"))
    cfg.collect_episodes = doc.at("collect_episodes").get<int>();
  if (doc.contains("collect_horizon"))
    cfg.collect_horizon = doc.at("collect_horizon").get<int>();
  if (doc.contains("out")) cfg.out = doc.at("out").get<std::string>();
  if (doc.contains("format")) cfg.format = doc.at("format").get<std::string>();
  if (doc.contains("timings")) cfg.timings = doc.at("timings").get<bool>();
  cfg.validate();
  return cfg;
}

double normalize_return(double raw, double undelayed_ref, double random_ref) {
  if (undelayed_ref == random_ref)
    throw ValidationError("normalize_return: anchors coincide, normalization is undefined");
  return (raw - random_ref) / (undelayed_ref - random_ref);
}

namespace {

// Trained-table actor that plays `actions` on one-hot belief keys, with the
// matching state values as its critic. This is how every exact solution is
// exposed through the keyed-policy interface.
ActorSpec sharp_base_actor(StrategyKind strategy, int d, const TabularMdp& mdp,
                           const std::vector<int>& actions, const ValueFunction& values) {
  ActorSpec spec = make_actor(strategy, d, mdp.n_actions());
  for (int s = 0; s < mdp.n_states(); ++s) {
    const std::string key = belief_key(WorldModelState::one_hot(mdp.n_states(), s));
    Eigen::VectorXd logits = Eigen::VectorXd::Zero(mdp.n_actions());
    logits[actions[static_cast<std::size_t>(s)]] = kSharpLogit;
    spec.policy.logits[key] = std::move(logits);
    spec.critic.table[key] = values[s];
  }
  return spec;
}

// Exact solution of a (fully observed) environment in the form the strategy
// deploys: the policy table is keyed exactly as acting will key it.
ActorSpec solve_actor_dp(const BenchEnv& env, const TabularWorldModel& model, StrategyKind strategy,
                         int d) {
  if (!env.fully_observed)
    throw ValidationError("dp solver: environment observations must be one-hot");
  const TabularMdp& base = env.pomdp.mdp();
  if (strategy == StrategyKind::Extended)
    return materialize_extended_policy(solve_extended_optimal(base, d));
  if (strategy == StrategyKind::Memoryless) {
    MemorylessSolution sol = solve_memoryless_optimal(base, d);
    std::vector<int> actions(static_cast<std::size_t>(base.n_states()));
    for (int s = 0; s < base.n_states(); ++s)
      actions[static_cast<std::size_t>(s)] = sol.base_policy.action(s);
    return sharp_base_actor(strategy, d, base, actions,
                            policy_evaluation(base, sol.base_policy));
  }

  ValueIterationResult vi = value_iteration(base);
  if (strategy == StrategyKind::LatentDeterministic) {
    // The deployed keys are expected-propagated beliefs, one per (state,
    // queue): precompute the one-step-lookahead-greedy action at each.
    const Eigen::MatrixXd q = action_values(base, vi.values);
    ExtendedSpace space(base.n_states(), base.n_actions(), d);
    ActorSpec spec = make_actor(strategy, d, base.n_actions());
    for (int x = 0; x < space.n_states(); ++x) {
      const WorldModelState start = WorldModelState::one_hot(base.n_states(), space.base_state(x));
      const WorldModelState predicted = propagate_deterministic(model, start, space.queue(x));
      int best = 0;
      (q.transpose() * predicted.belief).maxCoeff(&best);
      const std::string key = belief_key(predicted);
      Eigen::VectorXd logits = Eigen::VectorXd::Zero(base.n_actions());
      logits[best] = kSharpLogit;
      spec.policy.logits[key] = std::move(logits);
      spec.critic.table[key] = predicted.belief.dot(vi.values);
    }
    return spec;
  }
  // LatentSampled propagation lands on one-hot beliefs in a fully observed
  // environment, and Agnostic means deploying the undelayed optimum naively:
  // both reduce to the greedy base policy on one-hot keys.
  std::vector<int> actions(static_cast<std::size_t>(base.n_states()));
  for (int s = 0; s < base.n_states(); ++s)
    actions[static_cast<std::size_t>(s)] = vi.policy.action(s);
  return sharp_base_actor(strategy, d, base, actions, vi.values);
}

ActorSpec train_row_actor(const BenchEnv& env, const TabularWorldModel& model,
                          StrategyKind strategy, int d, std::uint64_t seed,
                          const ExperimentConfig& cfg) {
  const int d_train = strategy == StrategyKind::Agnostic ? 0 : d;
  const ReplayBuffer buffer = collect_random_episodes(env.pomdp, d_train, cfg.collect_episodes,
                                                      cfg.collect_horizon, mix_seed(seed, 0xC));
  TrainConfig train = cfg.train;
  train.seed = seed;
  const ActorSpec fresh = make_actor(strategy, d, env.pomdp.mdp().n_actions(), train);
  return train_actor_critic_imagination(model, fresh, buffer, train);
}

ResultRow run_row(const BenchEnv& env, const TabularWorldModel& model, StrategyKind strategy,
                  int d, std::uint64_t seed, const ExperimentConfig& cfg, double undelayed_ref,
                  double random_ref) {
  ResultRow row;
  row.env = cfg.env;
  row.strategy = strategy_name(strategy);
  row.d = d;
  row.seed = std::to_string(seed);
  const auto started = std::chrono::steady_clock::now();
  try {
    const ActorSpec actor = cfg.solver == "dp"
                                ? solve_actor_dp(env, model, strategy, d)
                                : train_row_actor(env, model, strategy, d, seed, cfg);
    const EvalResult eval = evaluate_actor(env.pomdp, DelaySchedule::constant(d), actor, model,
                                           cfg.episodes, cfg.horizon, mix_seed(seed, 0xE));
    row.raw_return = eval.mean;
    row.normalized_return = normalize_return(eval.mean, undelayed_ref, random_ref);
    row.std_error = eval.std_error;
  } catch (const std::exception& failure) {
    row.ok = false;
    row.error = failure.what();
    row.raw_return = std::numeric_limits<double>::quiet_NaN();
    row.normalized_return = std::numeric_limits<double>::quiet_NaN();
    row.std_error = std::numeric_limits<double>::quiet_NaN();
  }
  if (cfg.timings)
    row.runtime_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started)
            .count();
  return row;
}

// Mean row over the successful seeds of one (strategy, d) cell; std_error is
// the across-seed standard error of the normalized return.
ResultRow aggregate_row(const std::vector<ResultRow>& cell) {
  ResultRow agg;
  agg.env = cell.front().env;
  agg.strategy = cell.front().strategy;
  agg.d = cell.front().d;
  agg.seed = "mean";
  std::vector<double> raws, norms;
  for (const ResultRow& row : cell) {
    agg.runtime_ms += row.runtime_ms;
    if (!row.ok) continue;
    raws.push_back(row.raw_return);
    norms.push_back(row.normalized_return);
  }
  if (raws.empty()) {
    agg.ok = false;
    agg.error = "all seeds failed";
    agg.raw_return = std::numeric_limits<double>::quiet_NaN();
    agg.normalized_return = std::numeric_limits<double>::quiet_NaN();
    agg.std_error = std::numeric_limits<double>::quiet_NaN();
    return agg;
  }
  const auto n = static_cast<double>(norms.size());
  for (std::size_t i = 0; i < raws.size(); ++i) {
    agg.raw_return += raws[i] / n;
    agg.normalized_return += norms[i] / n;
  }
  double ss = 0.0;
  for (double v : norms) ss += (v - agg.normalized_return) * (v - agg.normalized_return);
  agg.std_error = norms.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
  return agg;
}

std::string format_double(double value) {
  char buffer[64];
  const auto [end, ec] = std::to_chars(buffer, buffer + sizeof buffer, value);
  if (ec != std::errc()) throw NumericalError("format_double: conversion failed");
  return std::string(buffer, end);
}

}  // namespace

ResultTable run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const BenchEnv env = make_bench_env(cfg.env, cfg.env_params);
  const TabularMdp& base = env.pomdp.mdp();
  const TabularWorldModel model = TabularWorldModel::exact(env.pomdp);

  ResultTable table;
  table.config = cfg;
  const int start = base.initial_state();
  table.random_ref =
      policy_evaluation(base, PolicyTable::uniform(base.n_states(), base.n_actions()))[start];
  if (env.fully_observed) {
    table.anchor_kind = "dp";
    table.undelayed_ref = value_iteration(base).values[start];
  } else {
    // No exact optimum is available, so the upper anchor is what an undelayed
    // trained agent of the same budget actually achieves.
    table.anchor_kind = "trained";
    TrainConfig anchor = cfg.train;
    anchor.seed = mix_seed(cfg.train.seed, 0xA);
    table.undelayed_ref = agnostic_pipeline(env.pomdp, 0, anchor, cfg.collect_episodes,
                                            cfg.collect_horizon, cfg.episodes, cfg.horizon)
                              .evaluation.mean;
  }
  if (table.undelayed_ref == table.random_ref)
    throw ValidationError("run_experiment: degenerate anchors (undelayed equals random)");

  for (StrategyKind strategy : cfg.strategies)
    for (int d : cfg.delays) {
      std::vector<ResultRow> cell;
      cell.reserve(cfg.seeds.size());
      for (std::uint64_t seed : cfg.seeds)
        cell.push_back(
            run_row(env, model, strategy, d, seed, cfg, table.undelayed_ref, table.random_ref));
      for (const ResultRow& row : cell) table.all_ok = table.all_ok && row.ok;
      table.rows.insert(table.rows.end(), cell.begin(), cell.end());
      table.rows.push_back(aggregate_row(cell));
    }
  return table;
}

std::string to_csv(const ResultTable& table) {
  std::string out = "env,strategy,d,seed,raw_return,normalized_return,stderr,runtime_ms\n";
  for (const ResultRow& row : table.rows) {
    out += row.env;
    out += ',';
    out += row.strategy;
    out += ',';
    out += std::to_string(row.d);
    out += ',';
    out += row.seed;
    out += ',';
    out += format_double(row.raw_return);
    out += ',';
    out += format_double(row.normalized_return);
    out += ',';
    out += format_double(row.std_error);
    out += ',';
    out += format_double(row.runtime_ms);
    out += '\n';
  }
  return out;
}

Json to_json(const ResultTable& table) {
  Json rows = Json::array();
  for (const ResultRow& row : table.rows) {
    Json r;
    r["env"] = row.env;
    r["strategy"] = row.strategy;
    r["d"] = row.d;
    r["seed"] = row.seed;
    r["raw_return"] = row.raw_return;
    r["normalized_return"] = row.normalized_return;
    r["stderr"] = row.std_error;
    r["runtime_ms"] = row.runtime_ms;
    r["anchor"] = table.anchor_kind;  // which undelayed reference scaled this row
    r["ok"] = row.ok;
    if (!row.ok) r["error"] = row.error;
    rows.push_back(std::move(r));
  }
  Json doc;
  doc["config"] = to_json(table.config);
  doc["anchor"] = Json{{"kind", table.anchor_kind},
                       {"undelayed_ref", table.undelayed_ref},
                       {"random_ref", table.random_ref}};
  doc["rows"] = std::move(rows);
  doc["all_ok"] = table.all_ok;
  return doc;
}

}  // namespace dwm
