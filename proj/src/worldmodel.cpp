#include "dwm/worldmodel.hpp"

#include <cmath>
#include <map>
#include <string>
#include <tuple>
#include <utility>

namespace dwm {

namespace {

// Inverse-CDF draw from a sparse outcome row; rounding slack lands on the
// last positive entry, matching sample_weighted.
const Outcome& sample_outcome(const std::vector<Outcome>& row, Rng& rng) {
  double u = uniform01(rng);
  const Outcome* last_positive = nullptr;
  for (const Outcome& candidate : row) {
    if (candidate.probability <= 0.0) continue;
    last_positive = &candidate;
    if (u < candidate.probability) return candidate;
    u -= candidate.probability;
  }
  if (last_positive == nullptr) throw NumericalError("sample_outcome: no positive mass");
  return *last_positive;
}

}  // namespace

void WorldModelState::validate() const {
  if (belief.size() == 0) throw ValidationError("world-model state: empty belief");
  double total = 0.0;
  for (Eigen::Index i = 0; i < belief.size(); ++i) {
    const double v = belief[i];
    if (!std::isfinite(v) || v < 0.0)
      throw ValidationError("world-model state: belief entries must be finite and nonnegative");
    total += v;
  }
  if (std::abs(total - 1.0) > kBeliefTolerance)
    throw ValidationError("world-model state: belief must sum to one");
}

WorldModelState WorldModelState::one_hot(int n_states, int state) {
  if (n_states < 1 || state < 0 || state >= n_states)
    throw ValidationError("world-model state: one_hot index out of range");
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n_states);
  b[state] = 1.0;
  return WorldModelState{std::move(b)};
}

WorldModelState WorldModelState::uniform(int n_states) {
  if (n_states < 1) throw ValidationError("world-model state: need at least one state");
  return WorldModelState{Eigen::VectorXd::Constant(n_states, 1.0 / n_states)};
}

TabularWorldModel::TabularWorldModel(TabularPomdp process, bool fitted, double alpha,
                                     std::optional<FitCounts> counts)
    : process_(std::move(process)), fitted_(fitted), alpha_(alpha), counts_(std::move(counts)) {
  if (alpha_ < 0.0) throw ValidationError("world model: alpha must be nonnegative");
  const int n = n_states();
  const int m = n_actions();
  transition_.reserve(static_cast<std::size_t>(m));
  expected_reward_ = Eigen::MatrixXd::Zero(n, m);
  for (int a = 0; a < m; ++a) {
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(n, n);
    for (int s = 0; s < n; ++s)
      for (const Outcome& o : process_.mdp().outcomes(s, a)) {
        t(o.next_state, s) += o.probability;
        expected_reward_(s, a) += o.probability * o.reward;
      }
    transition_.push_back(std::move(t));
  }
  obs_ = process_.obs_matrix();
}

TabularWorldModel TabularWorldModel::exact(TabularPomdp pomdp) {
  return TabularWorldModel(std::move(pomdp), false, 0.0, std::nullopt);
}

TabularWorldModel TabularWorldModel::learned(TabularPomdp pomdp, double alpha,
                                             std::optional<FitCounts> counts) {
  return TabularWorldModel(std::move(pomdp), true, alpha, std::move(counts));
}

WorldModelState TabularWorldModel::initial_state() const {
  return WorldModelState::one_hot(n_states(), process_.mdp().initial_state());
}

namespace {

void check_index(int value, int bound, const char* what) {
  if (value < 0 || value >= bound)
    throw ValidationError(std::string("world model: ") + what + " out of range");
}

}  // namespace

WorldModelState TabularWorldModel::belief_update(const WorldModelState& b, int a, int o) const {
  if (static_cast<int>(b.belief.size()) != n_states())
    throw ValidationError("world model: belief dimension mismatch");
  check_index(a, n_actions(), "action");
  check_index(o, n_obs(), "observation");
  Eigen::VectorXd weighted = (transition_[a] * b.belief).cwiseProduct(obs_.col(o));
  const double z = weighted.sum();
  if (!(z > 0.0))
    throw ModelMismatchError("belief update: observation has zero predictive probability");
  return WorldModelState{weighted / z};
}

WorldModelState TabularWorldModel::condition_on_obs(const WorldModelState& b, int o) const {
  if (static_cast<int>(b.belief.size()) != n_states())
    throw ValidationError("world model: belief dimension mismatch");
  check_index(o, n_obs(), "observation");
  Eigen::VectorXd weighted = b.belief.cwiseProduct(obs_.col(o));
  const double z = weighted.sum();
  if (!(z > 0.0))
    throw ModelMismatchError("belief conditioning: observation has zero probability");
  return WorldModelState{weighted / z};
}

WorldModelState TabularWorldModel::predict_belief(const WorldModelState& b, int a) const {
  if (static_cast<int>(b.belief.size()) != n_states())
    throw ValidationError("world model: belief dimension mismatch");
  check_index(a, n_actions(), "action");
  Eigen::VectorXd pushed = transition_[a] * b.belief;
  const double z = pushed.sum();
  if (!(z > 0.0)) throw NumericalError("predict_belief: lost probability mass");
  return WorldModelState{pushed / z};
}

std::pair<WorldModelState, double> TabularWorldModel::imagine_step(const WorldModelState& b,
                                                                   int a, Rng& rng) const {
  const int s = sample_state(b, rng);
  const Outcome& out = sample_outcome(process_.mdp().outcomes(s, a), rng);
  const int o = sample_obs(out.next_state, rng);
  return {belief_update(b, a, o), out.reward};
}

Eigen::VectorXd TabularWorldModel::obs_probabilities(const WorldModelState& b, int a) const {
  if (static_cast<int>(b.belief.size()) != n_states())
    throw ValidationError("world model: belief dimension mismatch");
  check_index(a, n_actions(), "action");
  return obs_.transpose() * (transition_[a] * b.belief);
}

double TabularWorldModel::expected_reward(const WorldModelState& b, int a) const {
  if (static_cast<int>(b.belief.size()) != n_states())
    throw ValidationError("world model: belief dimension mismatch");
  check_index(a, n_actions(), "action");
  return expected_reward_.col(a).dot(b.belief);
}

TabularWorldModel::SampledStep TabularWorldModel::sample_step(int state, int a, Rng& rng) const {
  check_index(state, n_states(), "state");
  check_index(a, n_actions(), "action");
  const Outcome& out = sample_outcome(process_.mdp().outcomes(state, a), rng);
  return SampledStep{out.next_state, out.reward, sample_obs(out.next_state, rng)};
}

int TabularWorldModel::sample_state(const WorldModelState& b, Rng& rng) const {
  if (static_cast<int>(b.belief.size()) != n_states())
    throw ValidationError("world model: belief dimension mismatch");
  return sample_weighted({b.belief.data(), static_cast<std::size_t>(b.belief.size())}, 1.0,
                         rng);
}

int TabularWorldModel::sample_obs(int state, Rng& rng) const {
  check_index(state, n_states(), "state");
  double u = uniform01(rng);
  int last_positive = -1;
  for (int o = 0; o < n_obs(); ++o) {
    const double p = obs_(state, o);
    if (p <= 0.0) continue;
    last_positive = o;
    if (u < p) return o;
    u -= p;
  }
  if (last_positive < 0) throw NumericalError("sample_obs: no positive mass");
  return last_positive;
}

TabularWorldModel fit_tabular_model(const ReplayBuffer& buffer, int n_states, int n_actions,
                                    int n_obs, double alpha, double gamma, int initial_state) {
  if (n_states < 1 || n_actions < 1 || n_obs < 1)
    throw ValidationError("fit: dimensions must be positive");
  if (alpha < 0.0) throw ValidationError("fit: alpha must be nonnegative");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw ValidationError("fit: gamma must lie in [0, 1)");
  if (buffer.n_entries() == 0) throw ValidationError("fit: replay buffer has no transitions");

  auto check_dim = [](int value, int bound, const char* what) {
    if (value < 0 || value >= bound)
      throw ValidationError(std::string("fit: ") + what + " out of range for the buffer");
  };

  std::map<std::tuple<int, int, int, double>, std::int64_t> joint;
  std::map<std::pair<int, int>, std::int64_t> observation;
  int first_state = -1;

  for (const ReplayEpisode& episode : buffer.episodes()) {
    const int k = static_cast<int>(episode.entries.size());
    const int tail = static_cast<int>(episode.tail_actions.size());
    if (k > 0 && first_state < 0) first_state = episode.entries.front().hidden_state;
    for (int u = 0; u < k; ++u) {
      const ReplayEntry& e = episode.entries[u];
      check_dim(e.hidden_state, n_states, "hidden state");
      check_dim(e.action, n_actions, "action");
      check_dim(e.obs, n_obs, "observation");
      if (!std::isfinite(e.reward)) throw ValidationError("fit: non-finite reward");
      observation[{e.hidden_state, e.obs}] += 1;
      int next = -1;
      if (u + 1 < k)
        next = episode.entries[u + 1].hidden_state;
      else if (tail > 0)
        next = episode.tail_hidden[0];
      if (next >= 0) {
        check_dim(next, n_states, "hidden state");
        joint[{e.hidden_state, e.action, next, e.reward}] += 1;
      }
    }
    for (int i = 0; i < tail; ++i) {
      check_dim(episode.tail_hidden[i], n_states, "hidden state");
      check_dim(episode.tail_actions[i], n_actions, "action");
    }
  }

  int init = initial_state;
  if (init < 0) {
    if (first_state < 0) throw ValidationError("fit: cannot infer the initial state");
    init = first_state;
  }
  check_dim(init, n_states, "initial state");

  // Bucket joint counts per (s, a) cell.
  const std::size_t n_cells = static_cast<std::size_t>(n_states) * n_actions;
  std::vector<std::vector<std::pair<std::pair<int, double>, std::int64_t>>> cells(n_cells);
  std::vector<std::vector<std::int64_t>> successor(n_cells,
                                                   std::vector<std::int64_t>(n_states, 0));
  std::vector<std::int64_t> cell_total(n_cells, 0);
  for (const auto& [key, count] : joint) {
    const auto& [s, a, next, reward] = key;
    const std::size_t idx = static_cast<std::size_t>(s) * n_actions + a;
    cells[idx].push_back({{next, reward}, count});
    successor[idx][next] += count;
    cell_total[idx] += count;
  }

  MdpBuilder builder(n_states, n_actions, gamma, init);
  for (int s = 0; s < n_states; ++s)
    for (int a = 0; a < n_actions; ++a) {
      const std::size_t idx = static_cast<std::size_t>(s) * n_actions + a;
      const double denom = static_cast<double>(cell_total[idx]) + alpha * n_states;
      if (denom == 0.0) {
        for (int next = 0; next < n_states; ++next)
          builder.add(s, a, next, 0.0, 1.0 / n_states);
        continue;
      }
      for (int next = 0; next < n_states; ++next) {
        const double mass = (static_cast<double>(successor[idx][next]) + alpha) / denom;
        if (mass <= 0.0) continue;
        if (successor[idx][next] == 0) {
          builder.add(s, a, next, 0.0, mass);
          continue;
        }
        for (const auto& [cell, count] : cells[idx])
          if (cell.first == next)
            builder.add(s, a, next, cell.second,
                        mass * (static_cast<double>(count) /
                                static_cast<double>(successor[idx][next])));
      }
    }

  std::vector<std::int64_t> state_total(n_states, 0);
  for (const auto& [key, count] : observation) state_total[key.first] += count;
  Eigen::MatrixXd obs = Eigen::MatrixXd::Zero(n_states, n_obs);
  for (int s = 0; s < n_states; ++s) {
    const double denom = static_cast<double>(state_total[s]) + alpha * n_obs;
    if (denom == 0.0) {
      obs.row(s).setConstant(1.0 / n_obs);
      continue;
    }
    for (int o = 0; o < n_obs; ++o) {
      auto it = observation.find({s, o});
      const double count = it == observation.end() ? 0.0 : static_cast<double>(it->second);
      obs(s, o) = (count + alpha) / denom;
    }
  }

  FitCounts counts;
  for (const auto& [key, count] : joint)
    counts.transitions.push_back(TransitionCount{std::get<0>(key), std::get<1>(key),
                                                 std::get<2>(key), std::get<3>(key), count});
  for (const auto& [key, count] : observation)
    counts.observations.push_back(ObservationCount{key.first, key.second, count});

  return TabularWorldModel::learned(TabularPomdp(builder.build(), n_obs, std::move(obs)),
                                    alpha, std::move(counts));
}

DelayedWorldModel::DelayedWorldModel(TabularWorldModel inner, int d)
    : inner_(std::move(inner)), d_(d) {
  if (d < 0) throw ValidationError("delayed world model: d must be nonnegative");
}

DelayedWorldModel make_delayed(TabularWorldModel model, int d) {
  return DelayedWorldModel(std::move(model), d);
}

void DelayedWorldModel::reset_imagination(Rng& rng) {
  reset_imagination(inner_.initial_state(), rng);
}

void DelayedWorldModel::reset_imagination(const WorldModelState& b0, Rng& rng) {
  b0.validate();
  mode_ = Mode::Imagination;
  t_ = 0;
  particle_ = inner_.sample_state(b0, rng);
  state_history_.clear();
  reward_history_.clear();
  // The first latent state conditions on the observation the sampled hidden
  // state emits, mirroring what interaction would see.
  state_history_.push_back(inner_.condition_on_obs(b0, inner_.sample_obs(particle_, rng)));
}

std::pair<std::optional<WorldModelState>, double> DelayedWorldModel::imagine(int action,
                                                                             Rng& rng) {
  if (mode_ != Mode::Imagination)
    throw ValidationError("delayed world model: reset_imagination first");
  check_index(action, inner_.n_actions(), "action");
  // Read the exposed pair for this step, then advance the inner simulator.
  std::optional<WorldModelState> exposed;
  if (t_ >= d_) exposed = state_history_[static_cast<std::size_t>(t_ - d_)];
  const TabularWorldModel::SampledStep step = inner_.sample_step(particle_, action, rng);
  state_history_.push_back(inner_.belief_update(state_history_.back(), action, step.obs));
  reward_history_.push_back(step.reward);
  particle_ = step.next_state;
  const double reward = t_ >= d_ ? reward_history_[static_cast<std::size_t>(t_ - d_)] : 0.0;
  ++t_;
  return {std::move(exposed), reward};
}

void DelayedWorldModel::reset_interaction() { reset_interaction(inner_.initial_state()); }

void DelayedWorldModel::reset_interaction(const WorldModelState& b0) {
  b0.validate();
  mode_ = Mode::Interaction;
  t_ = 0;
  obs_seen_ = false;
  pending_action_.reset();
  state_history_.clear();
  reward_history_.clear();
  state_history_.push_back(b0);
}

void DelayedWorldModel::interact_dummy() {
  if (mode_ != Mode::Interaction)
    throw ValidationError("delayed world model: reset_interaction first");
  if (t_ >= d_) throw ValidationError("delayed world model: dummy step after warm-up");
  ++t_;
}

std::pair<WorldModelState, double> DelayedWorldModel::interact(int delayed_obs,
                                                               int delayed_action,
                                                               double delayed_reward) {
  if (mode_ != Mode::Interaction)
    throw ValidationError("delayed world model: reset_interaction first");
  if (t_ < d_) throw ValidationError("delayed world model: expected a dummy step");
  check_index(delayed_obs, inner_.n_obs(), "observation");
  check_index(delayed_action, inner_.n_actions(), "action");
  WorldModelState next =
      obs_seen_ ? inner_.belief_update(state_history_.back(), *pending_action_, delayed_obs)
                : inner_.condition_on_obs(state_history_.back(), delayed_obs);
  obs_seen_ = true;
  pending_action_ = delayed_action;
  state_history_.push_back(std::move(next));
  ++t_;
  return {state_history_.back(), delayed_reward};
}

const WorldModelState& DelayedWorldModel::inner_state() const {
  if (mode_ == Mode::Unset) throw ValidationError("delayed world model: state read before reset");
  return state_history_.back();
}

Json to_json(const TabularWorldModel& model) {
  Json doc = to_json(model.process());
  doc["fitted"] = model.fitted();
  doc["alpha"] = model.alpha();
  if (model.counts()) {
    Json transitions = Json::array();
    for (const TransitionCount& c : model.counts()->transitions)
      transitions.push_back(Json::array({c.state, c.action, c.next_state, c.reward, c.count}));
    Json observations = Json::array();
    for (const ObservationCount& c : model.counts()->observations)
      observations.push_back(Json::array({c.state, c.obs, c.count}));
    doc["counts"] = Json{{"transitions", std::move(transitions)},
                         {"observations", std::move(observations)}};
  }
  return doc;
}

TabularWorldModel world_model_from_json(const Json& doc) {
  TabularPomdp process = pomdp_from_json(doc);
  if (!doc.contains("fitted") || !doc["fitted"].is_boolean())
    throw ValidationError("world model JSON: fitted must be a boolean");
  if (!doc.contains("alpha") || !doc["alpha"].is_number())
    throw ValidationError("world model JSON: alpha must be a number");
  const bool fitted = doc["fitted"].get<bool>();
  const double alpha = doc["alpha"].get<double>();

  std::optional<FitCounts> counts;
  if (doc.contains("counts")) {
    const Json& block = doc["counts"];
    if (!block.is_object() || !block.contains("transitions") || !block.contains("observations"))
      throw ValidationError("world model JSON: counts needs transitions and observations");
    FitCounts parsed;
    for (const Json& entry : block["transitions"]) {
      if (!entry.is_array() || entry.size() != 5)
        throw ValidationError("world model JSON: transition counts must be [s,a,s',r,n]");
      parsed.transitions.push_back(TransitionCount{
          entry[0].get<int>(), entry[1].get<int>(), entry[2].get<int>(),
          entry[3].get<double>(), entry[4].get<std::int64_t>()});
    }
    for (const Json& entry : block["observations"]) {
      if (!entry.is_array() || entry.size() != 3)
        throw ValidationError("world model JSON: observation counts must be [s,o,n]");
      parsed.observations.push_back(ObservationCount{entry[0].get<int>(), entry[1].get<int>(),
                                                     entry[2].get<std::int64_t>()});
    }
    counts = std::move(parsed);
  }

  if (fitted) return TabularWorldModel::learned(std::move(process), alpha, std::move(counts));
  return TabularWorldModel::exact(std::move(process));
}

}  // namespace dwm
