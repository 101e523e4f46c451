#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "drex/mdp.hpp"
#include "drex/ranking.hpp"
#include "drex/solvers.hpp"

namespace drex {

enum class DemonstratorMode { truncated_vi, softmax_temperature, epsilon_perturbed_optimal };

std::string to_string(DemonstratorMode m);
DemonstratorMode demonstrator_mode_from_string(const std::string& s);

// Synthetic suboptimal demonstrator: value iteration stopped early, a softmax
// over optimal Q-values, or an epsilon-perturbed optimal policy.
struct DemonstratorSpec {
  DemonstratorMode mode = DemonstratorMode::truncated_vi;
  double parameter = 10;  // iteration cap, temperature, or epsilon
  int n_demos = 10;
  std::uint64_t seed = 0;
};

// The demonstrator policy itself (no rollouts, no suboptimality check).
// Truncated VI distributes ties uniformly so a zero-iteration demonstrator
// degenerates to the uniform-random policy.
Policy make_demonstrator(const Mdp& mdp, const DemonstratorSpec& spec);

// Rollouts from the demonstrator, guaranteed strictly between uniform-random
// and optimal: first the demonstrator policy's exact return must lie strictly
// inside (J_uniform, J_optimal), then the sampled demo set's average return
// must as well (resampled with fresh seeds a bounded number of times).
std::vector<Trajectory> generate_demonstrations(const Mdp& mdp,
                                                const DemonstratorSpec& spec,
                                                int max_retries = 10);

enum class BcModel { tabular, softmax_linear };

struct BcConfig {
  BcModel model = BcModel::tabular;
  // Additive smoothing on tabular counts; keeps rollouts off zero-probability
  // dead ends. States never visited fall back to uniform.
  double smoothing_alpha = 1e-3;
  // Softmax-linear mode: gradient ascent until the gradient norm drops below
  // grad_tol.
  double step_size = 0.5;
  double grad_tol = 1e-6;
  int max_iters = 5000;
};

struct BcTrainLog {
  double final_nll = 0.0;
  int iterations = 0;
  std::vector<double> nll_per_epoch;
};

struct ClonedPolicy {
  Policy policy;
  BcTrainLog log;
};

// Maximum-likelihood behavioral cloning of the (s, a) pairs in the
// demonstrations.
ClonedPolicy behavioral_cloning(const Mdp& mdp, std::span<const Trajectory> demos,
                                const BcConfig& config = {});

// Epsilon-greedy wrap of the policy's argmax action a*: a* keeps probability
// 1 - eps + eps/|A|, every other action gets eps/|A|.
Policy epsilon_greedy_wrap(const Policy& policy, double epsilon);

struct NoiseSchedule {
  std::vector<double> levels;  // strictly decreasing, each in [0, 1]
  int rollouts_per_level = 5;

  void validate() const;
  // n_levels evenly spaced values from hi down to lo (inclusive).
  static NoiseSchedule even(int n_levels, int rollouts_per_level, double hi = 1.0,
                            double lo = 0.0);
};

struct DegradationRow {
  double epsilon = 0.0;
  double mean_return = 0.0;
  double std_return = 0.0;
  int n_rollouts = 0;
};

// Monte Carlo true-return degradation of the wrapped clone per noise level.
// Rollout length is the MDP horizon (50 if unset). Reproducible for a fixed
// seed regardless of worker count.
std::vector<DegradationRow> degradation_curve(const Policy& cloned, const Mdp& mdp,
                                              const NoiseSchedule& schedule,
                                              int rollouts, std::uint64_t seed,
                                              int workers = 1);

// The noisy rollout groups consumed by ranking (same sampling stream as
// degradation_curve); trajectories are tagged with their noise level.
std::vector<RolloutGroup> noisy_rollouts(const Policy& cloned, const Mdp& mdp,
                                         const NoiseSchedule& schedule,
                                         std::uint64_t seed, int workers = 1);

// Occupancy-weighted probability that the cloned policy picks an optimal
// action (the empirical beta of the noise-degradation model). Weights are the
// clone's own normalized discounted state occupancy.
double estimate_beta(const Mdp& mdp, const Policy& cloned, const ValueFunction& optimal);

// No-op demonstration augmentation: k stay-in-place trajectories appended as
// the lowest-ranked group. Off by default in every built-in config.
std::vector<Trajectory> noop_demonstrations(const Mdp& mdp, int count, int length);

}  // namespace drex
