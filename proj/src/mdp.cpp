#include "dwm/mdp.hpp"

#include <cmath>
#include <string>
#include <utility>

namespace dwm {

namespace {

void check_row_sum(double sum, const std::string& what) {
  if (std::abs(sum - 1.0) > kRowSumTolerance)
    throw ValidationError(what + ": probabilities sum to " + std::to_string(sum) +
                          ", expected 1 within 1e-12");
}

}  // namespace

TabularMdp::TabularMdp(int n_states, int n_actions, std::vector<std::vector<Outcome>> kernel,
                       double gamma, int initial_state)
    : n_states_(n_states),
      n_actions_(n_actions),
      gamma_(gamma),
      initial_state_(initial_state),
      max_abs_reward_(0.0),
      kernel_(std::move(kernel)) {
  if (n_states_ < 1 || n_actions_ < 1)
    throw ValidationError("TabularMdp: need at least one state and one action");
  if (!(gamma_ >= 0.0 && gamma_ < 1.0))
    throw ValidationError("TabularMdp: gamma must lie in [0, 1)");
  if (initial_state_ < 0 || initial_state_ >= n_states_)
    throw ValidationError("TabularMdp: initial state out of range");
  if (kernel_.size() != static_cast<std::size_t>(n_states_) * n_actions_)
    throw ValidationError("TabularMdp: kernel must have n_states * n_actions rows");
  for (int s = 0; s < n_states_; ++s) {
    for (int a = 0; a < n_actions_; ++a) {
      const auto& row = kernel_[static_cast<std::size_t>(s) * n_actions_ + a];
      if (row.empty())
        throw ValidationError("TabularMdp: empty outcome row at state " + std::to_string(s) +
                              ", action " + std::to_string(a));
      double sum = 0.0;
      for (const Outcome& o : row) {
        if (o.next_state < 0 || o.next_state >= n_states_)
          throw ValidationError("TabularMdp: successor state out of range");
        if (!(o.probability >= 0.0))
          throw ValidationError("TabularMdp: outcome probability must be nonnegative");
        if (!std::isfinite(o.reward)) throw ValidationError("TabularMdp: reward must be finite");
        sum += o.probability;
        max_abs_reward_ = std::max(max_abs_reward_, std::abs(o.reward));
      }
      check_row_sum(sum, "TabularMdp row (" + std::to_string(s) + ", " + std::to_string(a) + ")");
    }
  }
}

MdpBuilder::MdpBuilder(int n_states, int n_actions, double gamma, int initial_state)
    : n_states_(n_states),
      n_actions_(n_actions),
      gamma_(gamma),
      initial_state_(initial_state),
      kernel_(static_cast<std::size_t>(n_states) * n_actions) {}

MdpBuilder& MdpBuilder::add(int s, int a, int next_state, double reward, double probability) {
  if (s < 0 || s >= n_states_ || a < 0 || a >= n_actions_)
    throw ValidationError("MdpBuilder: state or action out of range");
  kernel_[static_cast<std::size_t>(s) * n_actions_ + a].push_back(
      Outcome{next_state, reward, probability});
  return *this;
}

TabularMdp MdpBuilder::build() const {
  return TabularMdp(n_states_, n_actions_, kernel_, gamma_, initial_state_);
}

TabularPomdp::TabularPomdp(TabularMdp mdp, int n_obs, Eigen::MatrixXd obs_matrix)
    : mdp_(std::move(mdp)), n_obs_(n_obs), obs_matrix_(std::move(obs_matrix)) {
  if (n_obs_ < 1) throw ValidationError("TabularPomdp: need at least one observation");
  if (obs_matrix_.rows() != mdp_.n_states() || obs_matrix_.cols() != n_obs_)
    throw ValidationError("TabularPomdp: obs_matrix must be n_states x n_obs");
  for (int s = 0; s < mdp_.n_states(); ++s) {
    double sum = 0.0;
    for (int o = 0; o < n_obs_; ++o) {
      if (!(obs_matrix_(s, o) >= 0.0))
        throw ValidationError("TabularPomdp: observation probability must be nonnegative");
      sum += obs_matrix_(s, o);
    }
    check_row_sum(sum, "TabularPomdp observation row " + std::to_string(s));
  }
}

TabularPomdp as_fully_observed(TabularMdp mdp) {
  const int n = mdp.n_states();
  Eigen::MatrixXd obs = Eigen::MatrixXd::Identity(n, n);
  return TabularPomdp(std::move(mdp), n, std::move(obs));
}

PolicyTable::PolicyTable(Eigen::MatrixXd probabilities, bool deterministic)
    : probabilities_(std::move(probabilities)), deterministic_(deterministic) {
  if (probabilities_.rows() < 1 || probabilities_.cols() < 1)
    throw ValidationError("PolicyTable: empty table");
  for (Eigen::Index s = 0; s < probabilities_.rows(); ++s) {
    double sum = 0.0;
    int ones = 0;
    for (Eigen::Index a = 0; a < probabilities_.cols(); ++a) {
      const double p = probabilities_(s, a);
      if (!(p >= 0.0)) throw ValidationError("PolicyTable: probabilities must be nonnegative");
      if (deterministic_ && p != 0.0 && p != 1.0)
        throw ValidationError("PolicyTable: deterministic rows must be one-hot");
      if (p == 1.0) ++ones;
      sum += p;
    }
    check_row_sum(sum, "PolicyTable row " + std::to_string(s));
    if (deterministic_ && ones != 1)
      throw ValidationError("PolicyTable: deterministic rows must be one-hot");
  }
}

PolicyTable PolicyTable::from_actions(const std::vector<int>& actions, int n_actions) {
  Eigen::MatrixXd probs =
      Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(actions.size()), n_actions);
  for (std::size_t s = 0; s < actions.size(); ++s) {
    if (actions[s] < 0 || actions[s] >= n_actions)
      throw ValidationError("PolicyTable: action out of range");
    probs(static_cast<Eigen::Index>(s), actions[s]) = 1.0;
  }
  return PolicyTable(std::move(probs), true);
}

PolicyTable PolicyTable::uniform(int n_states, int n_actions) {
  Eigen::MatrixXd probs =
      Eigen::MatrixXd::Constant(n_states, n_actions, 1.0 / static_cast<double>(n_actions));
  return PolicyTable(std::move(probs), false);
}

int PolicyTable::action(int s) const {
  if (!deterministic_) throw ValidationError("PolicyTable::action: table is stochastic");
  for (int a = 0; a < n_actions(); ++a)
    if (probabilities_(s, a) == 1.0) return a;
  throw ValidationError("PolicyTable::action: no one-hot entry");  // unreachable after validation
}

}  // namespace dwm
