#include "dwm/delay.hpp"

#include <json.hpp>

#include <cmath>
#include <sstream>
#include <string>

namespace dwm {

DelaySchedule DelaySchedule::constant(int d) {
  DelaySchedule s;
  s.kind = Kind::Constant;
  s.delay = d;
  return s;
}

void DelaySchedule::validate() const {
  if (kind != Kind::Constant)
    throw ValidationError("DelaySchedule: only constant delays are implemented");
  if (delay < 0) throw ValidationError("DelaySchedule: delay must be nonnegative");
}

ExtendedSpace::ExtendedSpace(int n_base_states, int n_actions, int d, std::int64_t max_states)
    : n_base_states_(n_base_states), n_actions_(n_actions), d_(d) {
  if (n_base_states_ < 1 || n_actions_ < 1)
    throw ValidationError("ExtendedSpace: need at least one state and one action");
  if (d_ < 0) throw ValidationError("ExtendedSpace: delay must be nonnegative");
  queue_radix_ = 1;
  for (int i = 0; i < d_; ++i) {
    queue_radix_ *= n_actions_;
    if (queue_radix_ > max_states)
      throw EnumerationGuardError("ExtendedSpace: queue space alone exceeds the state cap");
  }
  n_states_ = static_cast<std::int64_t>(n_base_states_) * queue_radix_;
  if (n_states_ > max_states)
    throw EnumerationGuardError("ExtendedSpace: " + std::to_string(n_states_) +
                                " extended states exceed the cap of " +
                                std::to_string(max_states));
}

int ExtendedSpace::encode(int base_state, const std::vector<int>& queue) const {
  if (base_state < 0 || base_state >= n_base_states_)
    throw ValidationError("ExtendedSpace::encode: base state out of range");
  if (static_cast<int>(queue.size()) != d_)
    throw ValidationError("ExtendedSpace::encode: queue must hold exactly d actions");
  std::int64_t index = base_state;
  for (int a : queue) {
    if (a < 0 || a >= n_actions_)
      throw ValidationError("ExtendedSpace::encode: queued action out of range");
    index = index * n_actions_ + a;
  }
  return static_cast<int>(index);
}

int ExtendedSpace::base_state(int index) const {
  return static_cast<int>(index / queue_radix_);
}

std::vector<int> ExtendedSpace::queue(int index) const {
  std::vector<int> q(d_);
  std::int64_t rest = index % queue_radix_;
  for (int i = d_ - 1; i >= 0; --i) {
    q[i] = static_cast<int>(rest % n_actions_);
    rest /= n_actions_;
  }
  return q;
}

int ExtendedSpace::shift(int index, int next_base, int action) const {
  if (d_ == 0) return next_base;
  // Drop the oldest digit, append the new action: arithmetic form of the
  // queue shift, no vector round-trip.
  const std::int64_t old_queue = index % queue_radix_;
  const std::int64_t shifted = (old_queue % (queue_radix_ / n_actions_)) * n_actions_ + action;
  return static_cast<int>(next_base * queue_radix_ + shifted);
}

TabularMdp extend_mdp(const TabularMdp& mdp, int d, std::int64_t max_states) {
  ExtendedSpace space(mdp.n_states(), mdp.n_actions(), d, max_states);
  const int n = space.n_states();
  std::vector<std::vector<Outcome>> kernel(static_cast<std::size_t>(n) * mdp.n_actions());
  for (int x = 0; x < n; ++x) {
    const int s = space.base_state(x);
    // The resolving base action: the oldest queued one, or (d = 0) the action
    // being taken right now.
    const int pending = d > 0 ? space.queue(x)[0] : -1;
    for (int a = 0; a < mdp.n_actions(); ++a) {
      const auto& base_row = mdp.outcomes(s, d > 0 ? pending : a);
      auto& row = kernel[static_cast<std::size_t>(x) * mdp.n_actions() + a];
      row.reserve(base_row.size());
      for (const Outcome& o : base_row)
        row.push_back(Outcome{space.shift(x, o.next_state, a), o.reward, o.probability});
    }
  }
  const int start = space.encode(mdp.initial_state(), std::vector<int>(d, 0));
  return TabularMdp(n, mdp.n_actions(), std::move(kernel), mdp.gamma(), start);
}

namespace {

int sample_obs(const TabularPomdp& pomdp, int s, Rng& rng) {
  const Eigen::MatrixXd& obs = pomdp.obs_matrix();
  std::vector<double> w(pomdp.n_obs());
  for (int o = 0; o < pomdp.n_obs(); ++o) w[o] = obs(s, o);
  return sample_weighted(w, 1.0, rng);
}

const Outcome& sample_outcome(const TabularMdp& mdp, int s, int a, Rng& rng) {
  const auto& row = mdp.outcomes(s, a);
  const double u = uniform01(rng);
  double acc = 0.0;
  std::size_t last = 0;
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (row[i].probability <= 0.0) continue;
    last = i;
    acc += row[i].probability;
    if (u < acc) return row[i];
  }
  return row[last];
}

}  // namespace

DelayedTrajectory delayed_rollout(const TabularPomdp& pomdp, const DelaySchedule& schedule,
                                  const AgentCallback& agent, int horizon, Rng& rng,
                                  const std::optional<std::vector<int>>& warmup_actions) {
  schedule.validate();
  const int d = schedule.delay;
  if (horizon < 0) throw ValidationError("delayed_rollout: horizon must be nonnegative");
  if (warmup_actions && static_cast<int>(warmup_actions->size()) != d)
    throw ValidationError("delayed_rollout: warmup must list exactly d actions");

  const TabularMdp& mdp = pomdp.mdp();
  DelayedTrajectory traj;
  traj.d = d;
  traj.steps.reserve(horizon);

  std::vector<int> obs_hist, act_hist;
  std::vector<double> rew_hist;
  int s = mdp.initial_state();
  for (int t = 0; t < horizon; ++t) {
    const int o = sample_obs(pomdp, s, rng);
    obs_hist.push_back(o);

    int a;
    if (t < d) {
      a = warmup_actions ? (*warmup_actions)[t] : uniform_below(rng, mdp.n_actions());
      if (a < 0 || a >= mdp.n_actions())
        throw ValidationError("delayed_rollout: warmup action out of range");
    } else {
      AgentView view;
      view.t = t;
      view.obs = obs_hist[t - d];
      // r_{t-d} is only generated once step t-d completes, so it can be shown
      // before acting only when the delay is positive.
      view.reward = d > 0 ? rew_hist[t - d] : 0.0;
      view.queue.assign(act_hist.end() - d, act_hist.end());
      a = agent(view);
      if (a < 0 || a >= mdp.n_actions())
        throw ValidationError("delayed_rollout: agent action out of range");
    }

    const Outcome& out = sample_outcome(mdp, s, a, rng);
    act_hist.push_back(a);
    rew_hist.push_back(out.reward);

    DelayedStep step;
    step.t = t;
    step.action = a;
    if (t >= d) {
      step.obs = obs_hist[t - d];
      step.reward = rew_hist[t - d];
    }
    step.hidden_state = s;
    step.hidden_obs = o;
    step.hidden_reward = out.reward;
    traj.steps.push_back(step);

    s = out.next_state;
  }
  return traj;
}

ReplayBuffer::ReplayBuffer(int d) : d_(d), n_entries_(0) {
  if (d < 0) throw ValidationError("ReplayBuffer: delay must be nonnegative");
}

void ReplayBuffer::add(ReplayEpisode episode) {
  if (episode.d != d_) throw ValidationError("ReplayBuffer: episode delay mismatch");
  for (const ReplayEntry& e : episode.entries)
    if (static_cast<int>(e.window.size()) != d_)
      throw ValidationError("ReplayBuffer: entry window must hold exactly d actions");
  if (episode.tail_actions.size() != episode.tail_hidden.size() ||
      static_cast<int>(episode.tail_actions.size()) > d_)
    throw ValidationError("ReplayBuffer: malformed tail");
  n_entries_ += static_cast<std::int64_t>(episode.entries.size());
  episodes_.push_back(std::move(episode));
}

ReplayEpisode shift_back(const DelayedTrajectory& trajectory) {
  const int d = trajectory.d;
  const int h = static_cast<int>(trajectory.steps.size());
  ReplayEpisode episode;
  episode.d = d;
  for (int u = 0; u + d < h; ++u) {
    const DelayedStep& delivery = trajectory.steps[u + d];
    if (!delivery.obs)
      throw ValidationError("shift_back: delivery step is missing its observation");
    ReplayEntry entry;
    entry.obs = *delivery.obs;
    entry.reward = delivery.reward;
    entry.action = trajectory.steps[u].action;
    entry.hidden_state = trajectory.steps[u].hidden_state;
    entry.window.reserve(d);
    for (int i = 0; i < d; ++i) entry.window.push_back(trajectory.steps[u + i].action);
    episode.entries.push_back(std::move(entry));
  }
  // Actions whose own delivery never arrived; kept so action windows and the
  // serialized step count stay complete.
  for (int u = std::max(0, h - d); u < h; ++u) {
    episode.tail_actions.push_back(trajectory.steps[u].action);
    episode.tail_hidden.push_back(trajectory.steps[u].hidden_state);
  }
  return episode;
}

namespace {

// Walks the base process step by step under delayed-rollout semantics,
// keeping the path's state and action history so the policy can be shown
// (s_{u-d}, a_{u-d}..a_{u-1}). Returns sum over paths of p * discounted path
// reward; never touches the extended construction it is meant to check.
struct DelayedEnumerator {
  const TabularMdp& mdp;
  const ExtendedPolicy& policy;
  int d;
  int horizon;
  const std::vector<int>& warmup;
  double leaf_budget;
  std::vector<int> states;   // s_0..s_u along the current path
  std::vector<int> actions;  // a_0..a_{u-1}

  double walk(int s, int u, double discount) {
    if (u == horizon) {
      if (--leaf_budget < 0.0)
        throw EnumerationGuardError("enumerate_delayed_return: tree exceeds the leaf cap");
      return 0.0;
    }
    int a;
    if (u < d) {
      a = warmup[u];
    } else {
      const std::vector<int> queue(actions.end() - d, actions.end());
      a = policy(states[u - d], queue);
      if (a < 0 || a >= mdp.n_actions())
        throw ValidationError("enumerate_delayed_return: policy action out of range");
    }
    double total = 0.0;
    actions.push_back(a);
    for (const Outcome& o : mdp.outcomes(s, a)) {
      if (o.probability == 0.0) continue;
      states.push_back(o.next_state);
      total += o.probability *
               (discount * o.reward + walk(o.next_state, u + 1, discount * mdp.gamma()));
      states.pop_back();
    }
    actions.pop_back();
    return total;
  }
};

}  // namespace

double enumerate_delayed_return(const TabularMdp& mdp, const ExtendedPolicy& policy, int d,
                                int horizon, const std::vector<int>& warmup_queue,
                                double max_leaves) {
  if (d < 0) throw ValidationError("enumerate_delayed_return: delay must be nonnegative");
  if (horizon < 0) throw ValidationError("enumerate_delayed_return: horizon must be nonnegative");
  if (static_cast<int>(warmup_queue.size()) != d)
    throw ValidationError("enumerate_delayed_return: warmup must list exactly d actions");
  for (int a : warmup_queue)
    if (a < 0 || a >= mdp.n_actions())
      throw ValidationError("enumerate_delayed_return: warmup action out of range");

  DelayedEnumerator en{mdp, policy, d, horizon, warmup_queue, max_leaves, {}, {}};
  en.states.push_back(mdp.initial_state());
  return en.walk(mdp.initial_state(), 0, 1.0);
}

namespace {

using Json = nlohmann::json;

Json step_record(int t, int action, const std::optional<int>& obs, double reward, int hidden_s) {
  Json rec;
  rec["t"] = t;
  rec["a"] = action;
  if (obs)
    rec["obs"] = *obs;
  else
    rec["dummy"] = true;
  rec["r"] = reward;
  rec["hidden_s"] = hidden_s;
  return rec;
}

struct ParsedRecord {
  int t = 0;
  int a = 0;
  std::optional<int> obs;
  double r = 0.0;
  int hidden_s = 0;
};

ParsedRecord parse_record(const std::string& line) {
  Json rec = Json::parse(line);
  for (const char* key : {"t", "a", "r", "hidden_s"})
    if (!rec.contains(key))
      throw ValidationError(std::string("trajectory JSONL: missing field ") + key);
  ParsedRecord out;
  out.t = rec["t"].get<int>();
  out.a = rec["a"].get<int>();
  out.r = rec["r"].get<double>();
  out.hidden_s = rec["hidden_s"].get<int>();
  if (rec.contains("obs"))
    out.obs = rec["obs"].get<int>();
  else if (!(rec.contains("dummy") && rec["dummy"].get<bool>()))
    throw ValidationError("trajectory JSONL: record needs obs or dummy: true");
  return out;
}

}  // namespace

std::string to_jsonl(const DelayedTrajectory& trajectory) {
  std::ostringstream out;
  for (const DelayedStep& s : trajectory.steps)
    out << step_record(s.t, s.action, s.obs, s.reward, s.hidden_state).dump() << '\n';
  return out.str();
}

std::string to_jsonl(const ReplayBuffer& buffer) {
  std::ostringstream out;
  for (const ReplayEpisode& ep : buffer.episodes()) {
    int t = 0;
    for (const ReplayEntry& e : ep.entries)
      out << step_record(t++, e.action, e.obs, e.reward, e.hidden_state).dump() << '\n';
    for (std::size_t i = 0; i < ep.tail_actions.size(); ++i)
      out << step_record(t++, ep.tail_actions[i], std::nullopt, 0.0, ep.tail_hidden[i]).dump()
          << '\n';
  }
  return out.str();
}

DelayedTrajectory trajectory_from_jsonl(const std::string& text, int d) {
  DelayedTrajectory traj;
  traj.d = d;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const ParsedRecord rec = parse_record(line);
    DelayedStep step;
    step.t = rec.t;
    step.action = rec.a;
    step.obs = rec.obs;
    step.reward = rec.r;
    step.hidden_state = rec.hidden_s;
    step.hidden_obs = -1;  // not part of the wire format
    step.hidden_reward = 0.0;
    if (step.t != static_cast<int>(traj.steps.size()))
      throw ValidationError("trajectory JSONL: steps must be consecutive from zero");
    traj.steps.push_back(step);
  }
  // Diagnostics that are recoverable from the delayed slots themselves.
  const int h = static_cast<int>(traj.steps.size());
  for (int u = 0; u + d < h; ++u) {
    if (traj.steps[u + d].obs) traj.steps[u].hidden_obs = *traj.steps[u + d].obs;
    traj.steps[u].hidden_reward = traj.steps[u + d].reward;
  }
  return traj;
}

ReplayBuffer replay_from_jsonl(const std::string& text, int d) {
  ReplayBuffer buffer(d);
  std::istringstream in(text);
  std::string line;
  std::vector<ParsedRecord> records;
  auto flush = [&]() {
    if (records.empty()) return;
    ReplayEpisode ep;
    ep.d = d;
    const int n = static_cast<int>(records.size());
    const int n_entries = std::max(0, n - d);
    for (int u = 0; u < n_entries; ++u) {
      const ParsedRecord& rec = records[u];
      if (!rec.obs) throw ValidationError("replay JSONL: realigned entry marked dummy");
      ReplayEntry e;
      e.obs = *rec.obs;
      e.action = rec.a;
      e.reward = rec.r;
      e.hidden_state = rec.hidden_s;
      for (int i = 0; i < d; ++i) e.window.push_back(records[u + i].a);
      ep.entries.push_back(std::move(e));
    }
    for (int u = n_entries; u < n; ++u) {
      if (records[u].obs) throw ValidationError("replay JSONL: tail record must be dummy");
      ep.tail_actions.push_back(records[u].a);
      ep.tail_hidden.push_back(records[u].hidden_s);
    }
    buffer.add(std::move(ep));
    records.clear();
  };
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ParsedRecord rec = parse_record(line);
    if (rec.t == 0) flush();
    if (rec.t != static_cast<int>(records.size()))
      throw ValidationError("replay JSONL: steps must be consecutive from zero");
    records.push_back(rec);
  }
  flush();
  return buffer;
}

}  // namespace dwm
