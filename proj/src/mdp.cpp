#include "drex/mdp.hpp"

#include <cmath>
#include <string>
#include <utility>

namespace drex {

namespace {

void check_probability_vector(const Eigen::VectorXd& v, const std::string& what) {
  double sum = 0.0;
  for (int i = 0; i < v.size(); ++i) {
    if (!(v[i] >= 0.0) || !std::isfinite(v[i]))
      throw ValidationError(what + ": negative or non-finite entry at index " +
                            std::to_string(i));
    sum += v[i];
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw ValidationError(what + ": entries sum to " + std::to_string(sum) +
                          ", expected 1");
}

}  // namespace

Mdp::Mdp(std::vector<Eigen::MatrixXd> transitions, Eigen::MatrixXd features,
         Eigen::VectorXd true_weights, double discount,
         Eigen::VectorXd initial_distribution, std::optional<int> horizon)
    : transitions_(std::move(transitions)),
      features_(std::move(features)),
      true_weights_(std::move(true_weights)),
      discount_(discount),
      horizon_(horizon),
      initial_distribution_(std::move(initial_distribution)) {
  n_actions_ = static_cast<int>(transitions_.size());
  if (n_actions_ == 0) throw ValidationError("mdp: at least one action required");
  n_states_ = static_cast<int>(transitions_[0].rows());
  if (n_states_ == 0) throw ValidationError("mdp: at least one state required");

  for (int a = 0; a < n_actions_; ++a) {
    const Eigen::MatrixXd& p = transitions_[a];
    if (p.rows() != n_states_ || p.cols() != n_states_)
      throw ValidationError("mdp: transition matrix for action " + std::to_string(a) +
                            " is not n_states x n_states");
    for (int s = 0; s < n_states_; ++s) {
      double row_sum = 0.0;
      for (int s2 = 0; s2 < n_states_; ++s2) {
        if (!(p(s, s2) >= 0.0) || !std::isfinite(p(s, s2)))
          throw ValidationError("mdp: invalid transition probability at (s=" +
                                std::to_string(s) + ", a=" + std::to_string(a) +
                                ", s'=" + std::to_string(s2) + ")");
        row_sum += p(s, s2);
      }
      if (std::abs(row_sum - 1.0) > 1e-9)
        throw ValidationError("mdp: transition row (s=" + std::to_string(s) +
                              ", a=" + std::to_string(a) + ") sums to " +
                              std::to_string(row_sum));
    }
  }

  if (features_.rows() != n_states_)
    throw ValidationError("mdp: feature matrix must have one row per state");
  if (true_weights_.size() != features_.cols())
    throw ValidationError("mdp: weight vector length must match feature dimension");
  if (!(discount_ >= 0.0) || discount_ >= 1.0)
    throw ValidationError("mdp: discount must lie in [0, 1)");
  if (horizon_ && *horizon_ < 1)
    throw ValidationError("mdp: horizon must be at least 1");
  if (initial_distribution_.size() != n_states_)
    throw ValidationError("mdp: initial distribution must have one entry per state");
  check_probability_vector(initial_distribution_, "mdp: initial distribution");

  const double l1 = true_weights_.lpNorm<1>();
  if (l1 > 1.0) {
    weight_scale_ = 1.0 / l1;
    true_weights_ *= weight_scale_;
  }
  true_rewards_ = features_ * true_weights_;
}

Eigen::MatrixXd Mdp::policy_transition_matrix(const Policy& policy) const {
  if (policy.n_states() != n_states_ || policy.n_actions() != n_actions_)
    throw ValidationError("policy shape does not match MDP");
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n_states_, n_states_);
  for (int a = 0; a < n_actions_; ++a)
    m += policy.action_probs.col(a).asDiagonal() * transitions_[a];
  return m;
}

void Mdp::check_trajectory(const Trajectory& traj) const {
  if (traj.steps.empty()) throw ValidationError("trajectory: empty");
  if (horizon_ && traj.length() > *horizon_)
    throw ValidationError("trajectory: length " + std::to_string(traj.length()) +
                          " exceeds horizon " + std::to_string(*horizon_));
  for (const Step& st : traj.steps) {
    if (st.state < 0 || st.state >= n_states_ || st.action < 0 ||
        st.action >= n_actions_)
      throw ValidationError("trajectory: step index out of range (state " +
                            std::to_string(st.state) + ", action " +
                            std::to_string(st.action) + ")");
  }
  if (traj.noise_level && (*traj.noise_level < 0.0 || *traj.noise_level > 1.0))
    throw ValidationError("trajectory: noise level outside [0, 1]");
}

double trajectory_return(const Trajectory& traj, const Eigen::VectorXd& reward,
                         double gamma) {
  if (traj.steps.empty()) throw ValidationError("trajectory_return: empty trajectory");
  double value = 0.0;
  double g = 1.0;
  for (const Step& st : traj.steps) {
    if (st.state < 0 || st.state >= reward.size())
      throw ValidationError("trajectory_return: state index " +
                            std::to_string(st.state) + " out of range");
    value += g * reward[st.state];
    g *= gamma;
  }
  return value;
}

double dataset_return(std::span<const Trajectory> dataset,
                      const Eigen::VectorXd& reward, double gamma) {
  if (dataset.empty()) throw EmptyDatasetError("dataset_return: empty dataset");
  double sum = 0.0;
  for (const Trajectory& traj : dataset) sum += trajectory_return(traj, reward, gamma);
  return sum / static_cast<double>(dataset.size());
}

Eigen::VectorXd trajectory_feature_expectations(const Trajectory& traj,
                                                const Mdp& mdp, double gamma) {
  mdp.check_trajectory(traj);
  Eigen::VectorXd phi = Eigen::VectorXd::Zero(mdp.feature_dim());
  double g = 1.0;
  for (const Step& st : traj.steps) {
    phi += g * mdp.features().row(st.state).transpose();
    g *= gamma;
  }
  return phi;
}

Eigen::VectorXd trajectory_feature_sum(const Trajectory& traj, const Mdp& mdp) {
  return trajectory_feature_expectations(traj, mdp, 1.0);
}

Eigen::VectorXd policy_feature_expectations(const Policy& policy, const Mdp& mdp) {
  policy.validate();
  const int n = mdp.n_states();
  const Eigen::MatrixXd m = mdp.policy_transition_matrix(policy);
  // F(s,:) = phi(s) + gamma * sum_{s'} M(s,s') F(s',:); gamma < 1 makes the
  // system nonsingular.
  const Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n) - mdp.discount() * m;
  const Eigen::MatrixXd f = a.partialPivLu().solve(mdp.features());
  if (!f.allFinite())
    throw Error("policy_feature_expectations: linear solve produced non-finite values");
  return f.transpose() * mdp.initial_distribution();
}

Eigen::VectorXd policy_feature_expectations(const Policy& policy, const Mdp& mdp,
                                            int horizon) {
  policy.validate();
  if (horizon < 1) throw DomainError("policy_feature_expectations: horizon must be >= 1");
  const Eigen::MatrixXd m = mdp.policy_transition_matrix(policy);
  // g_k(s) = expected discounted feature sum of a k-step episode from s.
  Eigen::MatrixXd g = mdp.features();
  for (int k = 1; k < horizon; ++k) g = mdp.features() + mdp.discount() * m * g;
  return g.transpose() * mdp.initial_distribution();
}

Trajectory sample_trajectory(const Mdp& mdp, const Policy& policy, int length,
                             Rng& rng) {
  if (length < 1) throw DomainError("sample_trajectory: length must be >= 1");
  if (policy.n_states() != mdp.n_states() || policy.n_actions() != mdp.n_actions())
    throw ValidationError("sample_trajectory: policy shape does not match MDP");
  Trajectory traj;
  traj.steps.reserve(length);
  const Eigen::VectorXd& init = mdp.initial_distribution();
  int state = rng.categorical({init.data(), static_cast<std::size_t>(init.size())});
  for (int t = 0; t < length; ++t) {
    const Eigen::VectorXd probs = policy.action_probs.row(state).transpose();
    const int action =
        rng.categorical({probs.data(), static_cast<std::size_t>(probs.size())});
    traj.steps.push_back({state, action});
    const Eigen::VectorXd next = mdp.transitions()[action].row(state).transpose();
    state = rng.categorical({next.data(), static_cast<std::size_t>(next.size())});
  }
  return traj;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> monte_carlo_feature_expectations(
    const Mdp& mdp, const Policy& policy, int length, int n_rollouts, Rng& rng) {
  if (n_rollouts < 1) throw DomainError("monte_carlo_feature_expectations: n_rollouts >= 1");
  const int d = mdp.feature_dim();
  Eigen::MatrixXd samples(n_rollouts, d);
  for (int i = 0; i < n_rollouts; ++i) {
    const Trajectory traj = sample_trajectory(mdp, policy, length, rng);
    samples.row(i) = trajectory_feature_expectations(traj, mdp, mdp.discount()).transpose();
  }
  const Eigen::VectorXd mean = samples.colwise().mean();
  Eigen::VectorXd se = Eigen::VectorXd::Zero(d);
  if (n_rollouts > 1) {
    for (int j = 0; j < d; ++j) {
      const double var =
          (samples.col(j).array() - mean[j]).square().sum() / (n_rollouts - 1);
      se[j] = std::sqrt(var / n_rollouts);
    }
  }
  return {mean, se};
}

}  // namespace drex
