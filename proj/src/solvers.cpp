#include "drex/solvers.hpp"

#include <algorithm>
#include <cmath>

namespace drex {

namespace {

// Q(s,a) = R(s) + gamma * sum_{s'} P(s'|s,a) V(s'); rewards are per-state, so
// the action only matters through the successor distribution.
Eigen::MatrixXd q_from_v(const Mdp& mdp, const Eigen::VectorXd& reward,
                         const Eigen::VectorXd& v) {
  Eigen::MatrixXd q(mdp.n_states(), mdp.n_actions());
  for (int a = 0; a < mdp.n_actions(); ++a)
    q.col(a) = reward + mdp.discount() * (mdp.transitions()[a] * v);
  return q;
}

Policy greedy_policy(const Eigen::MatrixXd& q, PolicyProvenance provenance) {
  Policy policy;
  policy.action_probs = Eigen::MatrixXd::Zero(q.rows(), q.cols());
  for (int s = 0; s < q.rows(); ++s) {
    int best = 0;
    for (int a = 1; a < q.cols(); ++a)
      if (q(s, a) > q(s, best)) best = a;
    policy.action_probs(s, best) = 1.0;
  }
  policy.provenance = provenance;
  return policy;
}

}  // namespace

ValueIterationResult value_iteration(const Mdp& mdp, const Eigen::VectorXd& reward,
                                     double tol, int max_iters) {
  if (!(tol > 0.0)) throw DomainError("value_iteration: tol must be positive");
  if (reward.size() != mdp.n_states())
    throw ValidationError("value_iteration: reward vector length mismatch");
  Eigen::VectorXd v = Eigen::VectorXd::Zero(mdp.n_states());
  double residual = 0.0;
  for (int it = 1; it <= max_iters; ++it) {
    const Eigen::MatrixXd q = q_from_v(mdp, reward, v);
    const Eigen::VectorXd v_next = q.rowwise().maxCoeff();
    residual = (v_next - v).lpNorm<Eigen::Infinity>();
    v = v_next;
    if (residual < tol) {
      ValueIterationResult result;
      result.values.q = q_from_v(mdp, reward, v);
      result.values.v = result.values.q.rowwise().maxCoeff();
      result.policy = greedy_policy(result.values.q, PolicyProvenance::optimal);
      result.iterations = it;
      result.residual = residual;
      return result;
    }
  }
  throw ConvergenceFailure("value_iteration: no convergence after " +
                               std::to_string(max_iters) +
                               " iterations (residual " + std::to_string(residual) + ")",
                           residual);
}

ValueFunction truncated_value_iteration(const Mdp& mdp, const Eigen::VectorXd& reward,
                                        int iterations) {
  if (iterations < 0) throw DomainError("truncated_value_iteration: iterations >= 0");
  Eigen::VectorXd v = Eigen::VectorXd::Zero(mdp.n_states());
  for (int it = 0; it < iterations; ++it)
    v = q_from_v(mdp, reward, v).rowwise().maxCoeff();
  ValueFunction vf;
  vf.q = q_from_v(mdp, reward, v);
  vf.v = v;
  return vf;
}

Eigen::VectorXd policy_value_exact(const Mdp& mdp, const Policy& policy,
                                   const Eigen::VectorXd& reward) {
  const int n = mdp.n_states();
  const Eigen::MatrixXd m = mdp.policy_transition_matrix(policy);
  const Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n) - mdp.discount() * m;
  const Eigen::VectorXd v = a.partialPivLu().solve(reward);
  if (!v.allFinite())
    throw Error("policy_value_exact: linear solve produced non-finite values");
  return v;
}

Eigen::VectorXd policy_value_iterative(const Mdp& mdp, const Policy& policy,
                                       const Eigen::VectorXd& reward, double tol,
                                       int max_iters) {
  const Eigen::MatrixXd m = mdp.policy_transition_matrix(policy);
  Eigen::VectorXd v = Eigen::VectorXd::Zero(mdp.n_states());
  for (int it = 0; it < max_iters; ++it) {
    const Eigen::VectorXd v_next = reward + mdp.discount() * (m * v);
    const double residual = (v_next - v).lpNorm<Eigen::Infinity>();
    v = v_next;
    if (residual < tol) return v;
  }
  throw ConvergenceFailure("policy_value_iterative: tolerance not reached", tol);
}

double policy_return(const Mdp& mdp, const Policy& policy,
                     const Eigen::VectorXd& reward) {
  return mdp.initial_distribution().dot(policy_value_exact(mdp, policy, reward));
}

double policy_return(const Mdp& mdp, const Policy& policy,
                     const Eigen::VectorXd& reward, int horizon) {
  if (horizon < 1) throw DomainError("policy_return: horizon must be >= 1");
  const Eigen::MatrixXd m = mdp.policy_transition_matrix(policy);
  Eigen::VectorXd v = reward;
  for (int k = 1; k < horizon; ++k) v = reward + mdp.discount() * (m * v);
  return mdp.initial_distribution().dot(v);
}

double policy_return_default(const Mdp& mdp, const Policy& policy,
                             const Eigen::VectorXd& reward) {
  if (mdp.horizon()) return policy_return(mdp, policy, reward, *mdp.horizon());
  return policy_return(mdp, policy, reward);
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Eigen::VectorXd sigmoid_normalize(const Eigen::VectorXd& raw) {
  return raw.unaryExpr([](double x) { return sigmoid(x); });
}

namespace {

Policy q_learning(const Mdp& mdp, const Eigen::VectorXd& reward,
                  const QLearningConfig& config, std::uint64_t seed) {
  const int n_states = mdp.n_states();
  const int n_actions = mdp.n_actions();
  const int episode_length =
      config.episode_length > 0 ? config.episode_length : mdp.horizon().value_or(50);
  Rng rng(seed);
  // Optimistic initialization; drives systematic exploration.
  const double q0 = reward.maxCoeff() / (1.0 - mdp.discount());
  Eigen::MatrixXd q = Eigen::MatrixXd::Constant(n_states, n_actions, q0);
  const Eigen::VectorXd& init = mdp.initial_distribution();
  for (int ep = 0; ep < config.episodes; ++ep) {
    const double frac =
        config.episodes > 1 ? static_cast<double>(ep) / (config.episodes - 1) : 1.0;
    const double lr = config.learning_rate +
                      frac * (config.learning_rate_final - config.learning_rate);
    int s = rng.categorical({init.data(), static_cast<std::size_t>(init.size())});
    for (int t = 0; t < episode_length; ++t) {
      int a;
      if (rng.uniform() < config.exploration) {
        a = rng.uniform_int(n_actions);
      } else {
        a = 0;
        for (int k = 1; k < n_actions; ++k)
          if (q(s, k) > q(s, a)) a = k;
      }
      const Eigen::VectorXd next = mdp.transitions()[a].row(s).transpose();
      const int s2 = rng.categorical({next.data(), static_cast<std::size_t>(next.size())});
      const double target = reward[s] + mdp.discount() * q.row(s2).maxCoeff();
      q(s, a) += lr * (target - q(s, a));
      s = s2;
    }
  }
  return greedy_policy(q, PolicyProvenance::learned);
}

}  // namespace

OptimizeResult optimize_on_reward_vector(const Mdp& mdp, const Eigen::VectorXd& reward,
                                         const SolverConfig& config, std::uint64_t seed) {
  if (reward.size() != mdp.n_states())
    throw ValidationError("optimize_on_reward_vector: reward vector length mismatch");
  OptimizeResult result;
  if (config.method == RlMethod::exact_vi) {
    ValueIterationResult vi =
        value_iteration(mdp, reward, config.vi_tol, config.vi_max_iters);
    vi.policy.provenance = PolicyProvenance::learned;
    result.policy = vi.policy;
    result.optimal_return = policy_return_default(mdp, result.policy, reward);
    result.achieved_return = result.optimal_return;
    return result;
  }

  const Eigen::VectorXd r =
      config.sigmoid_normalize.value_or(true) ? sigmoid_normalize(reward) : reward;
  result.policy = q_learning(mdp, r, config.q, seed);
  const ValueIterationResult vi =
      value_iteration(mdp, r, config.vi_tol, config.vi_max_iters);
  result.optimal_return = policy_return_default(mdp, vi.policy, r);
  result.achieved_return = policy_return_default(mdp, result.policy, r);
  const double uniform_return = policy_return_default(
      mdp, Policy::uniform(mdp.n_states(), mdp.n_actions()), r);
  const double span = result.optimal_return - uniform_return;
  if (span > 0.0 &&
      result.achieved_return - uniform_return < config.q.quality_fraction * span) {
    result.quality_warning = true;
    result.warning = "q-learning reached " + std::to_string(result.achieved_return) +
                     " of exact optimum " + std::to_string(result.optimal_return) +
                     " (uniform baseline " + std::to_string(uniform_return) + ")";
  }
  return result;
}

OptimizeResult optimize_on_learned_reward(const Mdp& mdp, const RewardFunction& model,
                                          const SolverConfig& config, std::uint64_t seed) {
  return optimize_on_reward_vector(mdp, model.state_rewards(mdp), config, seed);
}

}  // namespace drex
