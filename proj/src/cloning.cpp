#include "drex/cloning.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <thread>

#include "drex/stats.hpp"

namespace drex {

std::string to_string(DemonstratorMode m) {
  switch (m) {
    case DemonstratorMode::truncated_vi: return "truncated-vi";
    case DemonstratorMode::softmax_temperature: return "softmax-temperature";
    case DemonstratorMode::epsilon_perturbed_optimal: return "epsilon-perturbed-optimal";
  }
  return "truncated-vi";
}

DemonstratorMode demonstrator_mode_from_string(const std::string& s) {
  if (s == "truncated-vi") return DemonstratorMode::truncated_vi;
  if (s == "softmax-temperature") return DemonstratorMode::softmax_temperature;
  if (s == "epsilon-perturbed-optimal") return DemonstratorMode::epsilon_perturbed_optimal;
  throw ValidationError("unknown demonstrator mode: " + s);
}

namespace {

// Ties share the probability mass uniformly, so an uninformed Q degenerates
// to the uniform-random policy rather than a lowest-index one.
Policy tie_spreading_greedy(const Eigen::MatrixXd& q, PolicyProvenance provenance) {
  Policy policy;
  policy.action_probs = Eigen::MatrixXd::Zero(q.rows(), q.cols());
  for (int s = 0; s < q.rows(); ++s) {
    const double top = q.row(s).maxCoeff();
    const double tol = 1e-12 * std::max(1.0, std::abs(top));
    int ties = 0;
    for (int a = 0; a < q.cols(); ++a)
      if (q(s, a) >= top - tol) ++ties;
    for (int a = 0; a < q.cols(); ++a)
      if (q(s, a) >= top - tol) policy.action_probs(s, a) = 1.0 / ties;
  }
  policy.provenance = provenance;
  return policy;
}

}  // namespace

Policy make_demonstrator(const Mdp& mdp, const DemonstratorSpec& spec) {
  if (spec.n_demos < 1) throw DomainError("demonstrator: n_demos must be >= 1");
  switch (spec.mode) {
    case DemonstratorMode::truncated_vi: {
      const int iters = static_cast<int>(std::lround(spec.parameter));
      if (iters < 0 || std::abs(spec.parameter - iters) > 1e-9)
        throw DomainError("demonstrator: truncated-vi parameter must be a count >= 0");
      const ValueFunction vf = truncated_value_iteration(mdp, mdp.true_rewards(), iters);
      return tie_spreading_greedy(vf.q, PolicyProvenance::truncated);
    }
    case DemonstratorMode::softmax_temperature: {
      if (!(spec.parameter > 0.0))
        throw DomainError("demonstrator: temperature must be positive");
      const ValueIterationResult vi = value_iteration(mdp, mdp.true_rewards());
      Policy policy;
      policy.action_probs.resize(mdp.n_states(), mdp.n_actions());
      for (int s = 0; s < mdp.n_states(); ++s) {
        const Eigen::VectorXd logits = vi.values.q.row(s).transpose() / spec.parameter;
        const Eigen::VectorXd shifted = (logits.array() - logits.maxCoeff()).exp();
        policy.action_probs.row(s) = (shifted / shifted.sum()).transpose();
      }
      policy.provenance = PolicyProvenance::truncated;
      return policy;
    }
    case DemonstratorMode::epsilon_perturbed_optimal: {
      const ValueIterationResult vi = value_iteration(mdp, mdp.true_rewards());
      return epsilon_greedy_wrap(vi.policy, spec.parameter);
    }
  }
  throw DomainError("demonstrator: unknown mode");
}

std::vector<Trajectory> generate_demonstrations(const Mdp& mdp,
                                                const DemonstratorSpec& spec,
                                                int max_retries) {
  const Policy demonstrator = make_demonstrator(mdp, spec);
  const Eigen::VectorXd& reward = mdp.true_rewards();
  const ValueIterationResult vi = value_iteration(mdp, reward);
  const double j_optimal = policy_return_default(mdp, vi.policy, reward);
  const double j_uniform = policy_return_default(
      mdp, Policy::uniform(mdp.n_states(), mdp.n_actions()), reward);
  const double j_demo = policy_return_default(mdp, demonstrator, reward);
  if (!(j_demo > j_uniform))
    throw DegenerateDemonstratorError(
        "demonstrator return " + std::to_string(j_demo) +
        " is not strictly above the uniform-random policy's " + std::to_string(j_uniform));
  if (!(j_demo < j_optimal))
    throw DegenerateDemonstratorError("demonstrator return " + std::to_string(j_demo) +
                                      " is not strictly below the optimal policy's " +
                                      std::to_string(j_optimal));

  const int length = mdp.horizon().value_or(50);
  for (int attempt = 0; attempt <= max_retries; ++attempt) {
    Rng rng(derive_seed(spec.seed, {0x64656d6fULL, static_cast<std::uint64_t>(attempt)}));
    std::vector<Trajectory> demos;
    demos.reserve(spec.n_demos);
    for (int i = 0; i < spec.n_demos; ++i)
      demos.push_back(sample_trajectory(mdp, demonstrator, length, rng));
    const double avg = dataset_return(demos, reward, mdp.discount());
    if (avg > j_uniform && avg < j_optimal) return demos;
  }
  throw DegenerateDemonstratorError(
      "demonstration average return stayed outside (uniform, optimal) after " +
      std::to_string(max_retries + 1) + " attempts");
}

namespace {

ClonedPolicy tabular_cloning(const Mdp& mdp, std::span<const Trajectory> demos,
                             double alpha) {
  Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(mdp.n_states(), mdp.n_actions());
  for (const Trajectory& traj : demos) {
    mdp.check_trajectory(traj);
    for (const Step& st : traj.steps) counts(st.state, st.action) += 1.0;
  }
  ClonedPolicy cloned;
  cloned.policy.action_probs.resize(mdp.n_states(), mdp.n_actions());
  for (int s = 0; s < mdp.n_states(); ++s) {
    const double total = counts.row(s).sum();
    if (total == 0.0) {
      cloned.policy.action_probs.row(s).setConstant(1.0 / mdp.n_actions());
    } else {
      cloned.policy.action_probs.row(s) =
          (counts.row(s).array() + alpha) / (total + alpha * mdp.n_actions());
    }
  }
  cloned.policy.provenance = PolicyProvenance::cloned;

  double nll = 0.0;
  for (const Trajectory& traj : demos)
    for (const Step& st : traj.steps)
      nll -= std::log(cloned.policy.action_probs(st.state, st.action));
  cloned.log.final_nll = nll;
  cloned.log.iterations = 1;
  cloned.log.nll_per_epoch = {nll};
  return cloned;
}

ClonedPolicy softmax_linear_cloning(const Mdp& mdp, std::span<const Trajectory> demos,
                                    const BcConfig& config) {
  const int d = mdp.feature_dim();
  const int n_actions = mdp.n_actions();
  std::vector<Step> data;
  for (const Trajectory& traj : demos) {
    mdp.check_trajectory(traj);
    data.insert(data.end(), traj.steps.begin(), traj.steps.end());
  }

  // pi(a|s) = softmax_a(theta_a . phi(s)); maximize the mean log-likelihood.
  Eigen::MatrixXd theta = Eigen::MatrixXd::Zero(n_actions, d);
  auto logits_for = [&](const Eigen::MatrixXd& th) {
    Eigen::MatrixXd logits = mdp.features() * th.transpose();  // n_states x n_actions
    return logits;
  };
  auto nll_of = [&](const Eigen::MatrixXd& th) {
    const Eigen::MatrixXd logits = logits_for(th);
    double nll = 0.0;
    for (const Step& st : data) {
      const Eigen::VectorXd row = logits.row(st.state).transpose();
      const double mx = row.maxCoeff();
      const double lse = mx + std::log((row.array() - mx).exp().sum());
      nll -= row[st.action] - lse;
    }
    return nll / static_cast<double>(data.size());
  };

  BcTrainLog log;
  double step = config.step_size;
  double nll = nll_of(theta);
  log.nll_per_epoch.push_back(nll);
  int it = 0;
  for (; it < config.max_iters; ++it) {
    const Eigen::MatrixXd logits = logits_for(theta);
    Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(n_actions, d);
    for (const Step& st : data) {
      const Eigen::VectorXd row = logits.row(st.state).transpose();
      const Eigen::VectorXd probs =
          ((row.array() - row.maxCoeff()).exp() /
           (row.array() - row.maxCoeff()).exp().sum())
              .matrix();
      const Eigen::VectorXd phi = mdp.features().row(st.state).transpose();
      grad.row(st.action) += phi.transpose();
      grad -= probs * phi.transpose();
    }
    grad /= static_cast<double>(data.size());
    if (grad.norm() < config.grad_tol) break;

    // Halve the step whenever a move would increase the NLL; keeps the
    // recorded curve non-increasing.
    Eigen::MatrixXd proposal = theta + step * grad;
    double proposal_nll = nll_of(proposal);
    while (proposal_nll > nll && step > 1e-12) {
      step *= 0.5;
      proposal = theta + step * grad;
      proposal_nll = nll_of(proposal);
    }
    theta = proposal;
    nll = proposal_nll;
    log.nll_per_epoch.push_back(nll);
  }
  log.final_nll = nll;
  log.iterations = it;

  ClonedPolicy cloned;
  cloned.policy.action_probs.resize(mdp.n_states(), n_actions);
  const Eigen::MatrixXd logits = logits_for(theta);
  for (int s = 0; s < mdp.n_states(); ++s) {
    const Eigen::VectorXd row = logits.row(s).transpose();
    const Eigen::VectorXd ex = (row.array() - row.maxCoeff()).exp();
    cloned.policy.action_probs.row(s) = (ex / ex.sum()).transpose();
  }
  cloned.policy.provenance = PolicyProvenance::cloned;
  cloned.log = std::move(log);
  return cloned;
}

}  // namespace

ClonedPolicy behavioral_cloning(const Mdp& mdp, std::span<const Trajectory> demos,
                                const BcConfig& config) {
  if (demos.empty()) throw EmptyDatasetError("behavioral_cloning: no demonstrations");
  if (config.model == BcModel::tabular)
    return tabular_cloning(mdp, demos, config.smoothing_alpha);
  return softmax_linear_cloning(mdp, demos, config);
}

Policy epsilon_greedy_wrap(const Policy& policy, double epsilon) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0))
    throw DomainError("epsilon_greedy_wrap: epsilon must lie in [0, 1]");
  const int n_states = policy.n_states();
  const int n_actions = policy.n_actions();
  const double off = epsilon / n_actions;
  Policy wrapped;
  wrapped.action_probs.resize(n_states, n_actions);
  for (int s = 0; s < n_states; ++s) {
    // The greedy action keeps 1 - eps + eps/|A|; everything else gets
    // eps/|A|. Exact argmax ties (an exactly-uniform cloned row at a state
    // the demos never visited) share the greedy mass instead of collapsing
    // onto an arbitrary index.
    const double top = policy.action_probs.row(s).maxCoeff();
    int ties = 0;
    for (int a = 0; a < n_actions; ++a)
      if (policy.action_probs(s, a) == top) ++ties;
    const double greedy_mass = 1.0 - (n_actions - ties) * off;
    for (int a = 0; a < n_actions; ++a)
      wrapped.action_probs(s, a) =
          policy.action_probs(s, a) == top ? greedy_mass / ties : off;
  }
  wrapped.provenance = PolicyProvenance::epsilon_wrapped;
  return wrapped;
}

void NoiseSchedule::validate() const {
  if (levels.empty()) throw ValidationError("noise schedule: no levels");
  if (rollouts_per_level < 1)
    throw ValidationError("noise schedule: rollouts_per_level must be >= 1");
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (levels[i] < 0.0 || levels[i] > 1.0)
      throw ValidationError("noise schedule: level " + std::to_string(i) +
                            " outside [0, 1]");
    if (i > 0 && !(levels[i - 1] > levels[i]))
      throw ValidationError("noise schedule: levels must be strictly decreasing");
  }
}

NoiseSchedule NoiseSchedule::even(int n_levels, int rollouts_per_level, double hi,
                                  double lo) {
  if (n_levels < 1) throw DomainError("noise schedule: n_levels must be >= 1");
  NoiseSchedule s;
  s.rollouts_per_level = rollouts_per_level;
  if (n_levels == 1) {
    s.levels = {hi};
  } else {
    for (int i = 0; i < n_levels; ++i)
      s.levels.push_back(hi - (hi - lo) * i / (n_levels - 1));
  }
  s.validate();
  return s;
}

namespace {

// Runs fn(i) for i in [0, n) across `workers` threads. Tasks derive their own
// seeds from the task index, so the outcome is identical for any worker
// count.
void parallel_for(int n, int workers, const std::function<void(int)>& fn) {
  workers = std::max(1, workers);
  if (workers == 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> threads;
  const int per = (n + workers - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    const int lo = w * per;
    const int hi = std::min(n, lo + per);
    if (lo >= hi) break;
    threads.emplace_back([lo, hi, &fn] {
      for (int i = lo; i < hi; ++i) fn(i);
    });
  }
  for (std::thread& t : threads) t.join();
}

}  // namespace

std::vector<RolloutGroup> noisy_rollouts(const Policy& cloned, const Mdp& mdp,
                                         const NoiseSchedule& schedule,
                                         std::uint64_t seed, int workers) {
  schedule.validate();
  const int length = mdp.horizon().value_or(50);
  std::vector<RolloutGroup> groups(schedule.levels.size());
  for (std::size_t i = 0; i < schedule.levels.size(); ++i) {
    groups[i].epsilon = schedule.levels[i];
    groups[i].trajectories.resize(schedule.rollouts_per_level);
  }
  const int k = schedule.rollouts_per_level;
  const int total = static_cast<int>(schedule.levels.size()) * k;
  std::vector<Policy> wrapped;
  wrapped.reserve(schedule.levels.size());
  for (double eps : schedule.levels) wrapped.push_back(epsilon_greedy_wrap(cloned, eps));
  parallel_for(total, workers, [&](int task) {
    const int level = task / k;
    const int rollout = task % k;
    Rng rng(derive_seed(seed, {0x726f6cULL, static_cast<std::uint64_t>(level),
                               static_cast<std::uint64_t>(rollout)}));
    Trajectory traj = sample_trajectory(mdp, wrapped[level], length, rng);
    traj.noise_level = schedule.levels[level];
    groups[level].trajectories[rollout] = std::move(traj);
  });
  return groups;
}

std::vector<DegradationRow> degradation_curve(const Policy& cloned, const Mdp& mdp,
                                              const NoiseSchedule& schedule,
                                              int rollouts, std::uint64_t seed,
                                              int workers) {
  schedule.validate();
  if (rollouts < 1) throw DomainError("degradation_curve: rollouts must be >= 1");
  const int length = mdp.horizon().value_or(50);
  const int n_levels = static_cast<int>(schedule.levels.size());
  std::vector<std::vector<double>> returns(n_levels, std::vector<double>(rollouts));
  std::vector<Policy> wrapped;
  wrapped.reserve(n_levels);
  for (double eps : schedule.levels) wrapped.push_back(epsilon_greedy_wrap(cloned, eps));
  // Common random numbers: rollout j shares its stream across all levels, so
  // adjacent-level mean differences are positively correlated and the curve
  // comparison is far less noisy than independent sampling.
  parallel_for(n_levels * rollouts, workers, [&](int task) {
    const int level = task / rollouts;
    const int rollout = task % rollouts;
    Rng rng(derive_seed(seed, {0x64656772ULL, static_cast<std::uint64_t>(rollout)}));
    const Trajectory traj = sample_trajectory(mdp, wrapped[level], length, rng);
    returns[level][rollout] = trajectory_return(traj, mdp.true_rewards(), mdp.discount());
  });
  std::vector<DegradationRow> rows(n_levels);
  for (int i = 0; i < n_levels; ++i) {
    rows[i].epsilon = schedule.levels[i];
    rows[i].mean_return = mean(returns[i]);
    rows[i].std_return = sample_std(returns[i]);
    rows[i].n_rollouts = rollouts;
  }
  return rows;
}

double estimate_beta(const Mdp& mdp, const Policy& cloned, const ValueFunction& optimal) {
  const int n = mdp.n_states();
  const Eigen::MatrixXd m = mdp.policy_transition_matrix(cloned);
  const Eigen::MatrixXd a =
      (Eigen::MatrixXd::Identity(n, n) - mdp.discount() * m).transpose();
  Eigen::VectorXd occupancy = a.partialPivLu().solve(mdp.initial_distribution());
  occupancy /= occupancy.sum();
  double beta = 0.0;
  for (int s = 0; s < n; ++s) {
    const double top = optimal.q.row(s).maxCoeff();
    const double tol = 1e-9 * std::max(1.0, std::abs(top));
    double agree = 0.0;
    for (int act = 0; act < mdp.n_actions(); ++act)
      if (optimal.q(s, act) >= top - tol) agree += cloned.action_probs(s, act);
    beta += occupancy[s] * agree;
  }
  return beta;
}

std::vector<Trajectory> noop_demonstrations(const Mdp& mdp, int count, int length) {
  if (count < 1 || length < 1)
    throw DomainError("noop_demonstrations: count and length must be >= 1");
  int start = 0;
  mdp.initial_distribution().maxCoeff(&start);
  // Whichever action is most likely to keep the state in place.
  int stay_action = 0;
  for (int a = 1; a < mdp.n_actions(); ++a)
    if (mdp.transition(start, a, start) > mdp.transition(start, stay_action, start))
      stay_action = a;
  Trajectory traj;
  traj.steps.assign(length, Step{start, stay_action});
  traj.noise_level = std::nullopt;
  return std::vector<Trajectory>(count, traj);
}

}  // namespace drex
