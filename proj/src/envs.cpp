#include "dwm/envs.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "dwm/rng.hpp"

namespace dwm {

void Fig2Params::validate() const {
  if (!(delta >= 0.0 && delta <= 0.5))
    throw ValidationError("fig2: delta must lie in [0, 1/2]");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw ValidationError("fig2: gamma must lie in [0, 1)");
}

TabularMdp fig2_mdp(const Fig2Params& params) {
  params.validate();
  const double delta = params.delta;
  MdpBuilder b(3, 2, params.gamma, 0);
  // s1, loop action: +1 on both branches.
  if (delta < 1.0) b.add(0, 0, 0, 1.0, 1.0 - delta);
  if (delta > 0.0) b.add(0, 0, 1, 1.0, delta);
  // s1, quit action: trap.
  b.add(0, 1, 2, 0.0, 1.0);
  // s2 mirrors s1 with the action roles swapped and no reward.
  b.add(1, 0, 2, 0.0, 1.0);
  if (delta > 0.0) b.add(1, 1, 1, 0.0, delta);
  if (delta < 1.0) b.add(1, 1, 0, 0.0, 1.0 - delta);
  // Absorbing trap.
  b.add(2, 0, 2, 0.0, 1.0);
  b.add(2, 1, 2, 0.0, 1.0);
  return b.build();
}

Fig2ClosedForms fig2_closed_forms(const Fig2Params& params) {
  params.validate();
  const double gamma = params.gamma;
  const double delta = params.delta;
  Fig2ClosedForms forms;
  forms.v_undelayed = (1.0 - gamma * delta) / (1.0 - gamma);
  forms.v_delayed_d1 = 1.0 / (1.0 - gamma * (1.0 - delta));
  forms.ratio = (1.0 - gamma) / ((1.0 - gamma * delta) * (1.0 - gamma * (1.0 - delta)));
  return forms;
}

FactoredMdp::FactoredMdp(TabularMdp mdp_in, int n_positions_in, int n_velocities_in)
    : mdp(std::move(mdp_in)), n_positions(n_positions_in), n_velocities(n_velocities_in) {
  if (n_positions < 1 || n_velocities < 1)
    throw ValidationError("factored process: factors must be positive");
  if (n_positions * n_velocities != mdp.n_states())
    throw ValidationError("factored process: state count must equal position x velocity");
}

int FactoredMdp::state(int position, int velocity) const {
  if (position < 0 || position >= n_positions || velocity < 0 || velocity >= n_velocities)
    throw ValidationError("factored process: factor index out of range");
  return position * n_velocities + velocity;
}

void VelocityChainParams::validate() const {
  if (n_positions < 1) throw ValidationError("velocity chain: need at least one position");
  if (!(flip_prob >= 0.0 && flip_prob <= 0.5))
    throw ValidationError("velocity chain: flip_prob must lie in [0, 1/2]");
  if (!(gamma >= 0.0 && gamma < 1.0))
    throw ValidationError("velocity chain: gamma must lie in [0, 1)");
}

FactoredMdp velocity_chain(const VelocityChainParams& params) {
  params.validate();
  const int positions = params.n_positions;
  const double eps = params.flip_prob;
  MdpBuilder b(positions * 2, 2, params.gamma, 0);
  for (int p = 0; p < positions; ++p)
    for (int v = 0; v < 2; ++v) {
      const int s = p * 2 + v;
      const int next_p = (p + 1) % positions;
      for (int a = 0; a < 2; ++a) {
        const double reward = a == v ? 1.0 : 0.0;
        if (eps < 1.0) b.add(s, a, next_p * 2 + v, reward, 1.0 - eps);
        if (eps > 0.0) b.add(s, a, next_p * 2 + (1 - v), reward, eps);
      }
    }
  return FactoredMdp(b.build(), positions, 2);
}

void MaskedObsConfig::validate() const {
  if (!(rho >= 0.0 && rho <= 1.0))
    throw ValidationError("masked observations: rho must lie in [0, 1]");
}

TabularPomdp masked_pomdp(const FactoredMdp& base, const MaskedObsConfig& cfg) {
  cfg.validate();
  const int positions = base.n_positions;
  const int velocities = base.n_velocities;
  const int n_obs = (positions + 1) * velocities;
  Eigen::MatrixXd obs = Eigen::MatrixXd::Zero(base.mdp.n_states(), n_obs);
  for (int s = 0; s < base.mdp.n_states(); ++s) {
    const int p = base.position(s);
    const int v = base.velocity(s);
    obs(s, p * velocities + v) += 1.0 - cfg.rho;
    obs(s, positions * velocities + v) += cfg.rho;
  }
  return TabularPomdp(base.mdp, n_obs, std::move(obs));
}

namespace {

// One random stochastic row: `support` entries chosen without replacement,
// positive weights, normalized.
std::vector<double> random_row(int n, int support, Rng& rng) {
  std::vector<int> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  for (int i = 0; i < support; ++i)
    std::swap(idx[static_cast<std::size_t>(i)],
              idx[static_cast<std::size_t>(i + uniform_below(rng, n - i))]);
  std::vector<double> row(static_cast<std::size_t>(n), 0.0);
  double total = 0.0;
  for (int i = 0; i < support; ++i)
    total += row[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])] =
        uniform01(rng) + 0.05;
  for (double& w : row) w /= total;
  return row;
}

}  // namespace

TabularPomdp random_instance(std::uint64_t seed, int n_states, int n_actions, int n_obs,
                             double sparsity) {
  if (n_states < 1 || n_actions < 1 || n_obs < 1)
    throw ValidationError("random instance: sizes must be positive");
  if (!(sparsity >= 0.0 && sparsity < 1.0))
    throw ValidationError("random instance: sparsity must lie in [0, 1)");
  Rng rng(seed);
  const auto support_of = [sparsity](int n) {
    return std::max(1, static_cast<int>(std::lround((1.0 - sparsity) * n)));
  };

  MdpBuilder b(n_states, n_actions, 0.9, 0);
  for (int s = 0; s < n_states; ++s)
    for (int a = 0; a < n_actions; ++a) {
      const std::vector<double> row = random_row(n_states, support_of(n_states), rng);
      for (int next = 0; next < n_states; ++next)
        if (row[static_cast<std::size_t>(next)] > 0.0)
          b.add(s, a, next, uniform01(rng), row[static_cast<std::size_t>(next)]);
    }

  Eigen::MatrixXd obs = Eigen::MatrixXd::Zero(n_states, n_obs);
  for (int s = 0; s < n_states; ++s) {
    const std::vector<double> row = random_row(n_obs, support_of(n_obs), rng);
    for (int o = 0; o < n_obs; ++o) obs(s, o) = row[static_cast<std::size_t>(o)];
  }
  // Guarantee every observation column carries mass so the instance's
  // dimensions survive serialization.
  for (int o = 0; o < n_obs; ++o) {
    if (obs.col(o).maxCoeff() > 0.0) continue;
    const int s = o % n_states;
    obs(s, o) = 0.25;
    obs.row(s) /= obs.row(s).sum();
  }
  return TabularPomdp(b.build(), n_obs, std::move(obs));
}

}  // namespace dwm
