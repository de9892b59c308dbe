#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>
#include <string>

#include "dwm/worldmodel.hpp"

namespace dwm {

namespace {

// Latent states are keyed by their components quantized to 12 decimal
// digits; adding 0.0 folds negative zero into positive zero.
void append_state_key(std::string& key, const WorldModelState& m) {
  char buf[40];
  for (Eigen::Index i = 0; i < m.belief.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.12f,", m.belief[i] + 0.0);
    key += buf;
  }
  key += ';';
}

void append_reward_key(std::string& key, double r) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, r);
  key.append(buf, res.ptr);
  key += '|';
}

// Exhaustively enumerates the joint law of the (latent state, reward)
// sequence. `source` supplies transitions, rewards and observations; `model`
// supplies the filter. Interaction passes the environment as source,
// imagination passes the model's own process.
struct JointEnumerator {
  const TabularPomdp& source;
  const TabularWorldModel& model;
  const std::vector<int>& actions;
  int horizon;
  double& budget;
  std::map<std::string, double> atoms;

  void run() {
    const int s0 = source.mdp().initial_state();
    for (int o = 0; o < source.n_obs(); ++o) {
      const double po = source.obs_matrix()(s0, o);
      if (po <= 0.0) continue;
      bool explained = true;
      WorldModelState m0;
      try {
        m0 = model.condition_on_obs(model.initial_state(), o);
      } catch (const ModelMismatchError&) {
        explained = false;
      }
      if (explained)
        walk(s0, m0, 0, po, std::string());
      else
        leaf("!", po);
    }
  }

  void leaf(const std::string& key, double prob) {
    if ((budget -= 1.0) < 0.0)
      throw EnumerationGuardError("congruence check: branch budget exhausted");
    atoms[key] += prob;
  }

  void walk(int s, const WorldModelState& m, int t, double prob, const std::string& key) {
    if (t == horizon) {
      leaf(key, prob);
      return;
    }
    std::string with_state = key;
    append_state_key(with_state, m);
    const int a = actions[static_cast<std::size_t>(t)];
    for (const Outcome& out : source.mdp().outcomes(s, a)) {
      if (out.probability <= 0.0) continue;
      std::string with_reward = with_state;
      append_reward_key(with_reward, out.reward);
      for (int o = 0; o < source.n_obs(); ++o) {
        const double po = source.obs_matrix()(out.next_state, o);
        if (po <= 0.0) continue;
        const double p = prob * out.probability * po;
        bool explained = true;
        WorldModelState next;
        try {
          next = model.belief_update(m, a, o);
        } catch (const ModelMismatchError&) {
          explained = false;
        }
        if (explained)
          walk(out.next_state, next, t + 1, p, with_reward);
        else
          leaf(with_reward + "!", p);
      }
    }
  }
};

double total_variation(const std::map<std::string, double>& p,
                       const std::map<std::string, double>& q) {
  double acc = 0.0;
  for (const auto& [key, mass] : p) {
    const auto it = q.find(key);
    acc += std::abs(mass - (it == q.end() ? 0.0 : it->second));
  }
  for (const auto& [key, mass] : q)
    if (p.find(key) == p.end()) acc += mass;
  return acc / 2.0;
}

}  // namespace

Json to_json(const CongruenceReport& report) {
  Json doc;
  doc["tv_distance"] = report.tv_distance;
  doc["horizon"] = report.horizon;
  doc["d"] = report.d;
  doc["pass"] = report.pass;
  return doc;
}

CongruenceReport congruence_check(const TabularWorldModel& model, const TabularPomdp& env,
                                  const std::vector<int>& actions, int horizon, double tol,
                                  double max_branches) {
  if (horizon < 0) throw ValidationError("congruence check: horizon must be nonnegative");
  if (static_cast<int>(actions.size()) < horizon)
    throw ValidationError("congruence check: need one action per step");
  if (env.n_obs() != model.n_obs() || env.mdp().n_actions() != model.n_actions())
    throw ValidationError("congruence check: observation/action spaces must match");
  for (int t = 0; t < horizon; ++t)
    if (actions[static_cast<std::size_t>(t)] < 0 ||
        actions[static_cast<std::size_t>(t)] >= model.n_actions())
      throw ValidationError("congruence check: action out of range");

  double budget = max_branches;
  JointEnumerator interaction{env, model, actions, horizon, budget, {}};
  interaction.run();
  JointEnumerator imagination{model.process(), model, actions, horizon, budget, {}};
  imagination.run();

  CongruenceReport report;
  report.tv_distance = total_variation(interaction.atoms, imagination.atoms);
  report.horizon = horizon;
  report.d = 0;
  report.pass = report.tv_distance <= tol;
  return report;
}

CongruenceReport congruence_check(const DelayedWorldModel& model, const TabularPomdp& env,
                                  const std::vector<int>& actions, int horizon, double tol,
                                  double max_branches) {
  // Both delayed processes prepend d identical deterministic dummy steps and
  // then replay the undelayed processes on the first horizon - d actions, so
  // the distance equals the undelayed distance at the shortened horizon.
  const int inner_horizon = std::max(0, horizon - model.delay());
  CongruenceReport report =
      congruence_check(model.inner(), env, actions, inner_horizon, tol, max_branches);
  report.horizon = horizon;
  report.d = model.delay();
  return report;
}

}  // namespace dwm
