// Finite MDP / POMDP representations with joint next-state/reward kernels.
#pragma once

#include <Eigen/Dense>
#include <vector>

#include "dwm/errors.hpp"

namespace dwm {

// Probability rows must sum to one within this tolerance; they are validated
// at construction and never silently renormalized.
inline constexpr double kRowSumTolerance = 1e-12;

// One possible outcome of taking an action: successor state, reward emitted
// with that transition, probability of the pair.
struct Outcome {
  int next_state = 0;
  double reward = 0.0;
  double probability = 0.0;
};

// Finite-state MDP with a joint kernel T(s', r | s, a) stored as sparse
// per-(s, a) outcome lists. Immutable after construction.
class TabularMdp {
 public:
  TabularMdp(int n_states, int n_actions, std::vector<std::vector<Outcome>> kernel,
             double gamma, int initial_state);

  int n_states() const { return n_states_; }
  int n_actions() const { return n_actions_; }
  double gamma() const { return gamma_; }
  int initial_state() const { return initial_state_; }

  const std::vector<Outcome>& outcomes(int s, int a) const {
    return kernel_[static_cast<std::size_t>(s) * n_actions_ + a];
  }

  // Largest |r| over the kernel support; 0 for an all-zero-reward process.
  double max_abs_reward() const { return max_abs_reward_; }

 private:
  int n_states_;
  int n_actions_;
  double gamma_;
  int initial_state_;
  double max_abs_reward_;
  std::vector<std::vector<Outcome>> kernel_;  // index s * n_actions + a
};

// Incremental kernel assembly; validation happens once in build().
class MdpBuilder {
 public:
  MdpBuilder(int n_states, int n_actions, double gamma, int initial_state = 0);
  MdpBuilder& add(int s, int a, int next_state, double reward, double probability);
  TabularMdp build() const;

 private:
  int n_states_;
  int n_actions_;
  double gamma_;
  int initial_state_;
  std::vector<std::vector<Outcome>> kernel_;
};

// POMDP: an MDP plus a per-state observation distribution. obs_matrix is
// n_states x n_obs with rows summing to one.
class TabularPomdp {
 public:
  TabularPomdp(TabularMdp mdp, int n_obs, Eigen::MatrixXd obs_matrix);

  const TabularMdp& mdp() const { return mdp_; }
  int n_obs() const { return n_obs_; }
  const Eigen::MatrixXd& obs_matrix() const { return obs_matrix_; }

 private:
  TabularMdp mdp_;
  int n_obs_;
  Eigen::MatrixXd obs_matrix_;
};

// Wraps an MDP as the POMDP whose observation reveals the state exactly.
TabularPomdp as_fully_observed(TabularMdp mdp);

using ValueFunction = Eigen::VectorXd;

// Per-state action distribution; rows sum to one. A table flagged
// deterministic must have exactly one-hot rows.
class PolicyTable {
 public:
  PolicyTable(Eigen::MatrixXd probabilities, bool deterministic);

  static PolicyTable from_actions(const std::vector<int>& actions, int n_actions);
  static PolicyTable uniform(int n_states, int n_actions);

  int n_states() const { return static_cast<int>(probabilities_.rows()); }
  int n_actions() const { return static_cast<int>(probabilities_.cols()); }
  bool deterministic() const { return deterministic_; }
  const Eigen::MatrixXd& probabilities() const { return probabilities_; }
  double probability(int s, int a) const { return probabilities_(s, a); }

  // Action of a deterministic table's row.
  int action(int s) const;

 private:
  Eigen::MatrixXd probabilities_;
  bool deterministic_;
};

}  // namespace dwm
