// Command-line front end: `dwm run` executes an experiment sweep described by
// a JSON config and/or flags; `dwm check [name]` runs the built-in
// verification scenarios and reports one pass/fail line each.
#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "dwm/bench.hpp"
#include "dwm/checks.hpp"
#include "dwm/errors.hpp"

namespace {

dwm::Json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw dwm::ValidationError("cannot open config file: " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return dwm::Json::parse(buffer.str());
}

int run_command(const std::string& config_path, const CLI::App& cmd, const std::string& env,
                const std::vector<int>& delays, const std::vector<std::string>& strategies,
                const std::vector<std::uint64_t>& seeds, int episodes, int horizon,
                const std::string& solver, const std::string& out, const std::string& format,
                bool timings) {
  dwm::ExperimentConfig cfg;
  if (!config_path.empty()) cfg = dwm::config_from_json(load_json_file(config_path));
  if (cmd.count("--env") > 0) cfg.env = env;
  if (cmd.count("--delays") > 0) cfg.delays = delays;
  if (cmd.count("--strategies") > 0) {
    cfg.strategies.clear();
    for (const std::string& name : strategies)
      cfg.strategies.push_back(dwm::strategy_from_name(name));
  }
  if (cmd.count("--seeds") > 0) cfg.seeds = seeds;
  if (cmd.count("--episodes") > 0) cfg.episodes = episodes;
  if (cmd.count("--horizon") > 0) cfg.horizon = horizon;
  if (cmd.count("--solver") > 0) cfg.solver = solver;
  if (cmd.count("--out") > 0) cfg.out = out;
  if (cmd.count("--format") > 0) cfg.format = format;
  if (cmd.count("--timings") > 0) cfg.timings = timings;
  cfg.validate();

  const dwm::ResultTable table = dwm::run_experiment(cfg);
  const std::string text =
      cfg.format == "json" ? dwm::to_json(table).dump(2) + "\n" : dwm::to_csv(table);
  if (cfg.out.empty()) {
    std::cout << text;
  } else {
    std::ofstream file(cfg.out, std::ios::binary);
    if (!file) throw dwm::ValidationError("cannot open output file: " + cfg.out);
    file << text;
  }
  if (!table.all_ok) {
    for (const dwm::ResultRow& row : table.rows)
      if (!row.ok)
        std::cerr << "row failed: " << row.strategy << " d=" << row.d << " seed=" << row.seed
                  << ": " << row.error << "\n";
    return 1;
  }
  return 0;
}

int check_command(const std::string& which) {
  std::vector<dwm::CheckResult> results;
  if (which.empty()) {
    results = dwm::run_all_checks();
  } else if (which == "closed-form-grid") {
    results.push_back(dwm::check_closed_form_grid());
  } else if (which == "ratio-endpoints") {
    results.push_back(dwm::check_ratio_endpoints());
  } else if (which == "reduction-equivalence") {
    results.push_back(dwm::check_reduction_equivalence());
  } else if (which == "model-congruence") {
    results.push_back(dwm::check_model_congruence());
  } else if (which == "policy-class-ordering") {
    results.push_back(dwm::check_policy_ordering());
  } else if (which == "training-convergence") {
    results.push_back(dwm::check_training_convergence());
  } else if (which == "masked-trend") {
    results.push_back(dwm::check_masked_trend());
  } else if (which == "output-determinism") {
    results.push_back(dwm::check_output_determinism());
  } else {
    std::cerr << "unknown check: " << which << "\n";
    return 2;
  }
  bool all = true;
  for (const dwm::CheckResult& r : results) {
    std::printf("[%s] %s: %s\n", r.pass ? "PASS" : "FAIL", r.name.c_str(), r.detail.c_str());
    all = all && r.pass;
  }
  return all ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Delayed-observation benchmark suite"};
  app.require_subcommand(1);

  std::string config_path, env, solver, out, format, which;
  std::vector<int> delays;
  std::vector<std::string> strategies;
  std::vector<std::uint64_t> seeds;
  int episodes = 0, horizon = 0;
  bool timings = false;

  CLI::App* run = app.add_subcommand("run", "Run an experiment sweep");
  run->add_option("--config", config_path, "JSON config file; flags override its fields");
  run->add_option("--env", env, "Environment name (fig2, velocity_chain, masked_chain, random)");
  run->add_option("--delays", delays, "Observation delays to sweep")->delimiter(',');
  run->add_option("--strategies", strategies,
                  "Strategies: extended, memoryless, latent_deterministic, latent_sampled, "
                  "agnostic")
      ->delimiter(',');
  run->add_option("--seeds", seeds, "Seeds, one row per seed")->delimiter(',');
  run->add_option("--episodes", episodes, "Evaluation episodes per row");
  run->add_option("--horizon", horizon, "Evaluation horizon");
  run->add_option("--solver", solver, "Row solver: train or dp");
  run->add_option("--out", out, "Output path (default stdout)");
  run->add_option("--format", format, "Output format: csv or json");
  run->add_flag("--timings", timings, "Record wall-clock runtime_ms per row");

  CLI::App* check = app.add_subcommand("check", "Run verification scenarios");
  check->add_option("name", which, "One scenario name; omit to run all");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed())
      return run_command(config_path, *run, env, delays, strategies, seeds, episodes, horizon,
                         solver, out, format, timings);
    return check_command(which);
  } catch (const std::exception& failure) {
    std::cerr << "error: " << failure.what() << "\n";
    return 2;
  }
}
