#include "dwm/serialization.hpp"

#include <fstream>

namespace dwm {

namespace {

int require_int(const Json& v, const char* what) {
  if (!v.is_number_integer()) throw ValidationError(std::string("process JSON: ") + what);
  return v.get<int>();
}

double require_real(const Json& v, const char* what) {
  if (!v.is_number()) throw ValidationError(std::string("process JSON: ") + what);
  return v.get<double>();
}

Json kernel_to_json(const TabularMdp& mdp) {
  Json kernel = Json::array();
  for (int s = 0; s < mdp.n_states(); ++s)
    for (int a = 0; a < mdp.n_actions(); ++a)
      for (const Outcome& o : mdp.outcomes(s, a))
        kernel.push_back(Json::array({s, a, o.next_state, o.reward, o.probability}));
  return kernel;
}

}  // namespace

Json to_json(const TabularMdp& mdp) {
  Json doc;
  doc["n_states"] = mdp.n_states();
  doc["n_actions"] = mdp.n_actions();
  doc["gamma"] = mdp.gamma();
  doc["initial_state"] = mdp.initial_state();
  doc["kernel"] = kernel_to_json(mdp);
  return doc;
}

Json to_json(const TabularPomdp& pomdp) {
  Json doc = to_json(pomdp.mdp());
  Json triplets = Json::array();
  const Eigen::MatrixXd& obs = pomdp.obs_matrix();
  for (int s = 0; s < pomdp.mdp().n_states(); ++s)
    for (int o = 0; o < pomdp.n_obs(); ++o)
      if (obs(s, o) != 0.0) triplets.push_back(Json::array({s, o, obs(s, o)}));
  doc["obs_matrix"] = triplets;
  return doc;
}

TabularMdp mdp_from_json(const Json& doc) {
  if (!doc.is_object()) throw ValidationError("process JSON: document must be an object");
  for (const char* key : {"n_states", "n_actions", "gamma", "initial_state", "kernel"})
    if (!doc.contains(key))
      throw ValidationError(std::string("process JSON: missing field ") + key);

  const int n_states = require_int(doc["n_states"], "n_states must be an integer");
  const int n_actions = require_int(doc["n_actions"], "n_actions must be an integer");
  const double gamma = require_real(doc["gamma"], "gamma must be a number");
  const int initial_state = require_int(doc["initial_state"], "initial_state must be an integer");
  if (n_states < 1 || n_actions < 1)
    throw ValidationError("process JSON: n_states and n_actions must be positive");

  std::vector<std::vector<Outcome>> kernel(static_cast<std::size_t>(n_states) * n_actions);
  if (!doc["kernel"].is_array()) throw ValidationError("process JSON: kernel must be an array");
  for (const Json& entry : doc["kernel"]) {
    if (!entry.is_array() || entry.size() != 5)
      throw ValidationError("process JSON: kernel entries must be [s, a, s', r, p]");
    const int s = require_int(entry[0], "kernel state must be an integer");
    const int a = require_int(entry[1], "kernel action must be an integer");
    const int next = require_int(entry[2], "kernel successor must be an integer");
    const double r = require_real(entry[3], "kernel reward must be a number");
    const double p = require_real(entry[4], "kernel probability must be a number");
    if (s < 0 || s >= n_states || a < 0 || a >= n_actions)
      throw ValidationError("process JSON: kernel state or action out of range");
    kernel[static_cast<std::size_t>(s) * n_actions + a].push_back(Outcome{next, r, p});
  }
  return TabularMdp(n_states, n_actions, std::move(kernel), gamma, initial_state);
}

TabularPomdp pomdp_from_json(const Json& doc) {
  TabularMdp mdp = mdp_from_json(doc);
  if (!doc.contains("obs_matrix") || !doc["obs_matrix"].is_array())
    throw ValidationError("process JSON: obs_matrix must be present for a POMDP");
  int n_obs = 0;
  for (const Json& entry : doc["obs_matrix"]) {
    if (!entry.is_array() || entry.size() != 3)
      throw ValidationError("process JSON: obs_matrix entries must be [s, o, p]");
    n_obs = std::max(n_obs, require_int(entry[1], "observation index must be an integer") + 1);
  }
  if (n_obs == 0) throw ValidationError("process JSON: obs_matrix has no entries");
  Eigen::MatrixXd obs = Eigen::MatrixXd::Zero(mdp.n_states(), n_obs);
  for (const Json& entry : doc["obs_matrix"]) {
    const int s = require_int(entry[0], "observation state must be an integer");
    const int o = require_int(entry[1], "observation index must be an integer");
    const double p = require_real(entry[2], "observation probability must be a number");
    if (s < 0 || s >= mdp.n_states() || o < 0)
      throw ValidationError("process JSON: obs_matrix state out of range");
    obs(s, o) = p;
  }
  return TabularPomdp(std::move(mdp), n_obs, std::move(obs));
}

void save_json(const Json& doc, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("save_json: cannot open " + path.string());
  out << doc.dump(2) << '\n';
}

Json load_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("load_json: cannot open " + path.string());
  return Json::parse(in);
}

}  // namespace dwm
