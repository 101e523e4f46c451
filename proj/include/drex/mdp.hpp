#pragma once

#include <Eigen/Dense>
#include <optional>
#include <span>
#include <vector>

#include "drex/policy.hpp"
#include "drex/rng.hpp"

namespace drex {

struct Step {
  int state = 0;
  int action = 0;
  bool operator==(const Step&) const = default;
};

// A rollout: the visited (state, action) pairs in order, plus the noise
// level that generated it when it came from an epsilon-injected policy.
struct Trajectory {
  std::vector<Step> steps;
  std::optional<double> noise_level;

  int length() const { return static_cast<int>(steps.size()); }
  bool operator==(const Trajectory&) const = default;
};

// Tabular MDP with linear true reward R*(s) = w* . phi(s).
//
// transitions[a](s, s') is P(s'|s, a). The true weight vector is scaled down
// to ||w*||_1 <= 1 at construction (weight_scale records the factor applied)
// so the extrapolation-condition checks apply without further bookkeeping.
class Mdp {
 public:
  Mdp(std::vector<Eigen::MatrixXd> transitions, Eigen::MatrixXd features,
      Eigen::VectorXd true_weights, double discount,
      Eigen::VectorXd initial_distribution,
      std::optional<int> horizon = std::nullopt);

  int n_states() const { return n_states_; }
  int n_actions() const { return n_actions_; }
  int feature_dim() const { return static_cast<int>(features_.cols()); }
  double discount() const { return discount_; }
  std::optional<int> horizon() const { return horizon_; }

  const std::vector<Eigen::MatrixXd>& transitions() const { return transitions_; }
  const Eigen::MatrixXd& features() const { return features_; }
  const Eigen::VectorXd& true_weights() const { return true_weights_; }
  const Eigen::VectorXd& initial_distribution() const { return initial_distribution_; }
  double weight_scale() const { return weight_scale_; }

  // R*(s) for every state.
  const Eigen::VectorXd& true_rewards() const { return true_rewards_; }

  double transition(int s, int a, int s2) const { return transitions_[a](s, s2); }

  // State-transition matrix of the Markov chain induced by a policy:
  // M(s, s') = sum_a pi(a|s) P(s'|s, a).
  Eigen::MatrixXd policy_transition_matrix(const Policy& policy) const;

  void check_trajectory(const Trajectory& traj) const;

 private:
  int n_states_;
  int n_actions_;
  std::vector<Eigen::MatrixXd> transitions_;
  Eigen::MatrixXd features_;
  Eigen::VectorXd true_weights_;
  Eigen::VectorXd true_rewards_;
  double discount_;
  std::optional<int> horizon_;
  Eigen::VectorXd initial_distribution_;
  double weight_scale_ = 1.0;
};

// J(tau|R) = sum_t gamma^t R(s_t). Actions along the trajectory are ignored;
// rewards are per-state.
double trajectory_return(const Trajectory& traj, const Eigen::VectorXd& reward,
                         double gamma);

// J(D|R) = mean of trajectory returns; empty D is an error.
double dataset_return(std::span<const Trajectory> dataset,
                      const Eigen::VectorXd& reward, double gamma);

// Discounted feature counts of a single trajectory: sum_t gamma^t phi(s_t).
Eigen::VectorXd trajectory_feature_expectations(const Trajectory& traj,
                                                const Mdp& mdp, double gamma);

// Undiscounted per-state feature sum (snippet scores in the ranking loss use
// these).
Eigen::VectorXd trajectory_feature_sum(const Trajectory& traj, const Mdp& mdp);

// Exact expected discounted feature counts Phi_pi, infinite horizon, via the
// linear system (I - gamma M_pi) F = phi solved per feature column.
Eigen::VectorXd policy_feature_expectations(const Policy& policy, const Mdp& mdp);

// Finite-horizon variant: expectation of sum_{t<T} gamma^t phi(s_t) by
// backward recursion.
Eigen::VectorXd policy_feature_expectations(const Policy& policy, const Mdp& mdp,
                                            int horizon);

// Samples a rollout of `length` steps starting from the MDP's initial
// distribution.
Trajectory sample_trajectory(const Mdp& mdp, const Policy& policy, int length,
                             Rng& rng);

// Monte Carlo estimate of Phi_pi from `n_rollouts` sampled trajectories of
// the given length; returns (estimate, per-coordinate standard error).
std::pair<Eigen::VectorXd, Eigen::VectorXd> monte_carlo_feature_expectations(
    const Mdp& mdp, const Policy& policy, int length, int n_rollouts, Rng& rng);

}  // namespace drex
