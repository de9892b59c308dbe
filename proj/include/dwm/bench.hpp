// Benchmark sweeps: named environment registry, (strategy x delay x seed)
// experiment grids with anchored return normalization, and deterministic
// CSV/JSON result tables. run_experiment records per-row failures instead of
// aborting, so a sweep always produces a complete table.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dwm/actors.hpp"
#include "dwm/envs.hpp"
#include "dwm/serialization.hpp"

namespace dwm {

// A registry environment: the partially observable process plus whether its
// observations are one-hot state readouts; only then are exact DP anchors and
// the "dp" solver available.
struct BenchEnv {
  TabularPomdp pomdp;
  bool fully_observed = false;
};

// Environments by name. Parameters are a JSON object; missing keys take the
// defaults listed, unknown keys are rejected.
//   "fig2"            {delta: 0.5, gamma: 0.9}
//   "velocity_chain"  {n_positions: 4, flip_prob: 0.05, gamma: 0.9}
//   "masked_chain"    {n_positions: 4, flip_prob: 0.05, gamma: 0.9, rho: 0.5}
//   "random"          {seed: 1, n_states: 3, n_actions: 2, n_obs: 3,
//                      sparsity: 0.3}
BenchEnv make_bench_env(const std::string& name, const Json& params);

struct ExperimentConfig {
  std::string env = "fig2";
  Json env_params = Json::object();
  std::vector<int> delays = {0};
  std::vector<StrategyKind> strategies = {StrategyKind::Extended};
  std::vector<std::uint64_t> seeds = {1};
  int episodes = 200;  // evaluation episodes per row
  int horizon = 80;    // evaluation horizon
  // "train": per-row random collection + imagination training.
  // "dp": exact solvers; requires a fully observed environment.
  std::string solver = "train";
  TrainConfig train;         // training knobs; the per-row seed overrides train.seed
  int collect_episodes = 64;
  int collect_horizon = 32;
  std::string out;           // output path; empty writes to stdout
  std::string format = "csv";  // "csv" | "json"
  bool timings = false;      // record wall-clock runtime_ms (breaks byte determinism)

  void validate() const;
};

Json to_json(const ExperimentConfig& cfg);
// Missing fields keep their defaults; unknown fields are rejected.
ExperimentConfig config_from_json(const Json& doc);

// (raw - random_ref) / (undelayed_ref - random_ref). Equal anchors would make
// every score 0/0, so they are rejected loudly rather than divided through.
double normalize_return(double raw, double undelayed_ref, double random_ref);

// One sweep cell. Per-seed rows carry the episode-level standard error of the
// raw return; each (strategy, d) cell is followed by a seed="mean" aggregate
// whose std_error is instead the across-seed standard error of the
// normalized return. A failed row keeps NaN metrics plus the error text.
struct ResultRow {
  std::string env;
  std::string strategy;
  int d = 0;
  std::string seed;  // decimal seed, or "mean" for the cell aggregate
  double raw_return = 0.0;
  double normalized_return = 0.0;
  double std_error = 0.0;
  double runtime_ms = 0.0;
  bool ok = true;
  std::string error;
};

struct ResultTable {
  ExperimentConfig config;
  std::string anchor_kind;  // "dp" (exactly solvable) or "trained"
  double undelayed_ref = 0.0;
  double random_ref = 0.0;
  std::vector<ResultRow> rows;
  bool all_ok = true;
};

// Runs the sweep. Anchors are computed once per environment: random_ref is
// the exact uniform-policy value at the start state; undelayed_ref is the DP
// optimum when observations are one-hot, otherwise the evaluated return of an
// undelayed trained agent. Rows follow the configured strategy order, then
// delay order, then seed order, with the aggregate row closing each cell, so
// identical configs yield identical tables.
ResultTable run_experiment(const ExperimentConfig& cfg);

// Header: env,strategy,d,seed,raw_return,normalized_return,stderr,runtime_ms.
// Doubles print as shortest round-trip decimals; failed rows print nan.
std::string to_csv(const ResultTable& table);

// Same rows plus config echo, anchors, per-row ok/error, and all_ok.
Json to_json(const ResultTable& table);

}  // namespace dwm
