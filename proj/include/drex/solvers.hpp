#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>

#include "drex/mdp.hpp"
#include "drex/reward.hpp"

namespace drex {

struct ValueFunction {
  Eigen::VectorXd v;  // per state
  Eigen::MatrixXd q;  // n_states x n_actions
};

struct ValueIterationResult {
  ValueFunction values;
  Policy policy;
  int iterations = 0;
  double residual = 0.0;
};

// Value iteration on a per-state reward vector. Returns the greedy policy
// (ties broken by lowest action index) once the sup-norm Bellman residual
// drops below tol; throws ConvergenceFailure otherwise.
ValueIterationResult value_iteration(const Mdp& mdp, const Eigen::VectorXd& reward,
                                     double tol = 1e-10, int max_iters = 100000);

// k Bellman backups from V = 0 (no convergence requirement); used for
// truncated-horizon demonstrators.
ValueFunction truncated_value_iteration(const Mdp& mdp, const Eigen::VectorXd& reward,
                                        int iterations);

// Exact policy value via the linear system (I - gamma M_pi) V = R.
Eigen::VectorXd policy_value_exact(const Mdp& mdp, const Policy& policy,
                                   const Eigen::VectorXd& reward);

// Iterative policy evaluation (successive approximation); kept as an
// independent route for cross-checking the linear-solve results.
Eigen::VectorXd policy_value_iterative(const Mdp& mdp, const Policy& policy,
                                       const Eigen::VectorXd& reward,
                                       double tol = 1e-12, int max_iters = 1000000);

// J(pi|R) from the initial distribution; infinite horizon.
double policy_return(const Mdp& mdp, const Policy& policy,
                     const Eigen::VectorXd& reward);

// Finite-horizon J(pi|R): expected sum_{t<horizon} gamma^t R(s_t).
double policy_return(const Mdp& mdp, const Policy& policy,
                     const Eigen::VectorXd& reward, int horizon);

// J under the framing the MDP declares: finite-horizon when the MDP carries a
// horizon, discounted-infinite otherwise.
double policy_return_default(const Mdp& mdp, const Policy& policy,
                             const Eigen::VectorXd& reward);

// Elementwise logistic transform; monotone, so state-reward orderings are
// preserved.
double sigmoid(double x);
Eigen::VectorXd sigmoid_normalize(const Eigen::VectorXd& raw);

enum class RlMethod { exact_vi, q_learning };

struct QLearningConfig {
  int episodes = 5000;
  int episode_length = 0;  // 0: use the MDP horizon (or 50 if none)
  double learning_rate = 0.5;
  double learning_rate_final = 0.05;
  double exploration = 0.25;
  // Gate: (J_q - J_uniform) >= quality_fraction * (J_opt - J_uniform),
  // evaluated on the reward being optimized. Failing the gate is a warning,
  // not an error.
  double quality_fraction = 0.9;
};

struct SolverConfig {
  RlMethod method = RlMethod::q_learning;
  double vi_tol = 1e-10;
  int vi_max_iters = 100000;
  QLearningConfig q;
  // Feed R-hat through a sigmoid before optimizing. Only honored by
  // q-learning; exact VI always plans on the raw model so that results stay
  // interpretable under affine-invariance.
  std::optional<bool> sigmoid_normalize;
};

struct OptimizeResult {
  Policy policy;
  bool quality_warning = false;
  std::string warning;
  double achieved_return = 0.0;  // J(policy | optimized reward)
  double optimal_return = 0.0;   // J(pi*_Rhat | optimized reward)
};

// Algorithm step "optimize policy using RL with reward R-hat", for a reward
// already evaluated per state.
OptimizeResult optimize_on_reward_vector(const Mdp& mdp, const Eigen::VectorXd& reward,
                                         const SolverConfig& config, std::uint64_t seed);

OptimizeResult optimize_on_learned_reward(const Mdp& mdp, const RewardFunction& model,
                                          const SolverConfig& config, std::uint64_t seed);

}  // namespace drex
