#include "drex/ambiguity.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <thread>

#include "drex/envs.hpp"
#include "drex/stats.hpp"

namespace drex {

namespace {

constexpr double kStrictMargin = 1e-9;

void parallel_chunks(int n_chunks, int workers, const std::function<void(int)>& fn) {
  workers = std::max(1, workers);
  if (workers == 1 || n_chunks <= 1) {
    for (int i = 0; i < n_chunks; ++i) fn(i);
    return;
  }
  std::vector<std::thread> threads;
  const int per = (n_chunks + workers - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    const int lo = w * per;
    const int hi = std::min(n_chunks, lo + per);
    if (lo >= hi) break;
    threads.emplace_back([lo, hi, &fn] {
      for (int i = lo; i < hi; ++i) fn(i);
    });
  }
  for (std::thread& t : threads) t.join();
}

}  // namespace

Eigen::VectorXd sample_in_ball(int dim, BallType ball, Rng& rng) {
  if (dim < 1) throw DomainError("sample_in_ball: dim must be >= 1");
  Eigen::VectorXd x(dim);
  if (ball == BallType::l2) {
    for (int i = 0; i < dim; ++i) x[i] = rng.normal();
    const double norm = x.norm();
    if (norm == 0.0) return Eigen::VectorXd::Zero(dim);
    x /= norm;
  } else {
    // Uniform on the l1 sphere: normalized exponentials with random signs.
    double sum = 0.0;
    for (int i = 0; i < dim; ++i) {
      double u = rng.uniform();
      while (u <= 0.0) u = rng.uniform();
      x[i] = -std::log(u) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
      sum += std::abs(x[i]);
    }
    x /= sum;
  }
  return x * std::pow(rng.uniform(), 1.0 / dim);
}

bool satisfies(const AmbiguityProblem& problem, const Eigen::VectorXd& w) {
  for (const HalfspaceConstraint& c : problem.constraints) {
    const double v = w.dot(c.normal);
    if (c.strict ? v < kStrictMargin : v < 0.0) return false;
  }
  return true;
}

VolumeEstimate estimate_volume(const AmbiguityProblem& problem, int n_samples,
                               std::uint64_t seed, int workers) {
  if (n_samples < 1000)
    throw DomainError("estimate_volume: need at least 1000 samples");
  for (const HalfspaceConstraint& c : problem.constraints) {
    if (c.normal.size() != problem.dim)
      throw ValidationError("estimate_volume: constraint dimension mismatch");
    if (c.normal.lpNorm<Eigen::Infinity>() == 0.0)
      throw ValidationError("estimate_volume: zero constraint normal");
  }
  constexpr int kChunk = 1024;
  const int n_chunks = (n_samples + kChunk - 1) / kChunk;
  std::vector<long> hits(n_chunks, 0);
  parallel_chunks(n_chunks, workers, [&](int chunk) {
    Rng rng(derive_seed(seed, {0x766f6cULL, static_cast<std::uint64_t>(chunk)}));
    const int count = std::min(kChunk, n_samples - chunk * kChunk);
    long h = 0;
    for (int i = 0; i < count; ++i)
      if (satisfies(problem, sample_in_ball(problem.dim, problem.ball, rng))) ++h;
    hits[chunk] = h;
  });
  long total = 0;
  for (long h : hits) total += h;
  VolumeEstimate est;
  est.n_samples = n_samples;
  est.fraction = static_cast<double>(total) / n_samples;
  est.std_error = std::sqrt(est.fraction * (1.0 - est.fraction) / n_samples);
  return est;
}

std::vector<HalfspaceConstraint> constraints_from_ranking(
    std::span<const Eigen::VectorXd> feature_expectations_worst_to_best,
    RankingPairMode mode, bool strict, int* dropped) {
  const auto& phis = feature_expectations_worst_to_best;
  if (phis.size() < 2)
    throw DomainError("constraints_from_ranking: need at least two ranked items");
  std::vector<HalfspaceConstraint> constraints;
  int n_dropped = 0;
  auto add = [&](std::size_t worse, std::size_t better) {
    Eigen::VectorXd normal = phis[better] - phis[worse];
    if (normal.lpNorm<Eigen::Infinity>() == 0.0) {
      ++n_dropped;
      return;
    }
    constraints.push_back({std::move(normal), strict});
  };
  if (mode == RankingPairMode::adjacent) {
    for (std::size_t i = 0; i + 1 < phis.size(); ++i) add(i, i + 1);
  } else {
    for (std::size_t i = 0; i < phis.size(); ++i)
      for (std::size_t j = i + 1; j < phis.size(); ++j) add(i, j);
  }
  if (dropped) *dropped = n_dropped;
  return constraints;
}

Prop2Result prop2_compare(const Mdp& mdp, std::span<const Policy> ranking_worst_to_best,
                          int n_samples, std::uint64_t seed, BallType ball) {
  if (ranking_worst_to_best.empty())
    throw DomainError("prop2_compare: empty ranking");
  const std::size_t n = ranking_worst_to_best.size();

  std::vector<Eigen::VectorXd> phis;
  phis.reserve(n);
  for (const Policy& p : ranking_worst_to_best)
    phis.push_back(policy_feature_expectations(p, mdp));

  // The top-ranked policy must be optimal under the true reward.
  const ValueIterationResult vi = value_iteration(mdp, mdp.true_rewards());
  const double j_opt = policy_return(mdp, vi.policy, mdp.true_rewards());
  const double j_top =
      policy_return(mdp, ranking_worst_to_best[n - 1], mdp.true_rewards());
  if (j_top < j_opt - 1e-9)
    throw DomainError("prop2_compare: top-ranked policy is not optimal (J=" +
                      std::to_string(j_top) + " vs optimal " + std::to_string(j_opt) + ")");
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double j_i = policy_return(mdp, ranking_worst_to_best[i], mdp.true_rewards());
    if (j_i > j_top + 1e-9)
      throw DomainError("prop2_compare: ranking is not consistent with returns");
  }

  AmbiguityProblem optimal_only;
  optimal_only.dim = mdp.feature_dim();
  optimal_only.ball = ball;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    Eigen::VectorXd normal = phis[n - 1] - phis[i];
    if (normal.lpNorm<Eigen::Infinity>() == 0.0) continue;
    optimal_only.constraints.push_back({std::move(normal), false});
  }

  AmbiguityProblem ranked = optimal_only;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    for (std::size_t j = i + 1; j + 1 < n; ++j) {
      Eigen::VectorXd normal = phis[j] - phis[i];
      if (normal.lpNorm<Eigen::Infinity>() == 0.0) continue;
      ranked.constraints.push_back({std::move(normal), false});
    }
  }

  if (n_samples < 1000) throw DomainError("prop2_compare: need at least 1000 samples");
  Rng rng(derive_seed(seed, {0x70726f70ULL}));
  long hits_opt = 0, hits_ranked = 0, violations = 0;
  for (int i = 0; i < n_samples; ++i) {
    const Eigen::VectorXd w = sample_in_ball(optimal_only.dim, ball, rng);
    const bool in_opt = satisfies(optimal_only, w);
    const bool in_ranked = satisfies(ranked, w);
    hits_opt += in_opt;
    hits_ranked += in_ranked;
    violations += (in_ranked && !in_opt);
  }
  auto estimate = [n_samples](long hits) {
    VolumeEstimate e;
    e.n_samples = n_samples;
    e.fraction = static_cast<double>(hits) / n_samples;
    e.std_error = std::sqrt(e.fraction * (1.0 - e.fraction) / n_samples);
    return e;
  };
  Prop2Result result;
  result.ambiguity_optimal = estimate(hits_opt);
  result.ambiguity_ranked = estimate(hits_ranked);
  result.shared_samples = n_samples;
  result.subset_violations = static_cast<int>(violations);
  return result;
}

Corollary1Result corollary1_k(double x_percent) {
  if (!(x_percent >= 0.0) || x_percent >= 100.0)
    throw DomainError("corollary1_k: x must lie in [0, 100)");
  Corollary1Result r;
  r.k_real = std::log2(1.0 / (1.0 - x_percent / 100.0));
  r.k_ceil = static_cast<int>(std::ceil(r.k_real - 1e-12));
  return r;
}

EliminationCurve hypothesis_elimination_sim(int j0, int dim, int k, std::uint64_t seed,
                                            int n_trials) {
  if (j0 < 2) throw DomainError("hypothesis_elimination_sim: J0 must be >= 2");
  if (dim < 1 || k < 0 || n_trials < 1)
    throw DomainError("hypothesis_elimination_sim: bad dimensions");

  // remaining[t][step]
  std::vector<std::vector<double>> remaining(n_trials, std::vector<double>(k + 1, 0.0));
  for (int t = 0; t < n_trials; ++t) {
    Rng rng(derive_seed(seed, {0x68797073ULL, static_cast<std::uint64_t>(t)}));
    std::vector<Eigen::VectorXd> hypotheses;
    hypotheses.reserve(j0);
    for (int j = 0; j < j0; ++j) hypotheses.push_back(sample_in_ball(dim, BallType::l2, rng));
    std::vector<bool> alive(j0, true);
    int n_alive = j0;
    remaining[t][0] = n_alive;
    for (int step = 1; step <= k; ++step) {
      Eigen::VectorXd x(dim);
      for (int i = 0; i < dim; ++i) x[i] = rng.normal();
      const double norm = x.norm();
      if (norm > 0.0) x /= norm;
      for (int j = 0; j < j0; ++j) {
        if (alive[j] && hypotheses[j].dot(x) <= 0.0) {
          alive[j] = false;
          --n_alive;
        }
      }
      remaining[t][step] = n_alive;
    }
  }

  EliminationCurve curve;
  for (int step = 0; step <= k; ++step) {
    std::vector<double> vals(n_trials);
    for (int t = 0; t < n_trials; ++t) vals[t] = remaining[t][step];
    curve.mean_remaining.push_back(mean(vals));
    curve.std_error.push_back(standard_error(vals));
    curve.predicted.push_back(j0 / std::pow(2.0, step));
  }
  return curve;
}

TheoremOneReport theorem1_check(const Mdp& mdp, const RewardModel& reward_hat,
                                const Policy& policy_hat,
                                std::span<const Trajectory> demos) {
  if (reward_hat.kind() != RewardKind::linear)
    throw TheoremInapplicableError(
        "theorem1_check: the extrapolation condition is stated for linear rewards");
  if (demos.empty()) throw EmptyDatasetError("theorem1_check: no demonstrations");

  TheoremOneReport report;
  const double l1 = reward_hat.weights().lpNorm<1>();
  report.scale = l1 > 1.0 ? 1.0 / l1 : 1.0;

  const Eigen::VectorXd r_hat =
      report.scale * (mdp.features() * reward_hat.weights());
  const Eigen::VectorXd r_true = report.scale * mdp.true_rewards();
  report.epsilon_inf = (r_true - r_hat).lpNorm<Eigen::Infinity>();

  const ValueIterationResult vi = value_iteration(mdp, r_true);
  const Eigen::VectorXd phi_opt = policy_feature_expectations(vi.policy, mdp);
  const Eigen::VectorXd phi_hat = policy_feature_expectations(policy_hat, mdp);
  report.epsilon_phi = (phi_opt - phi_hat).lpNorm<Eigen::Infinity>();

  report.j_optimal = policy_return(mdp, vi.policy, r_true);
  report.j_policy = policy_return(mdp, policy_hat, r_true);
  report.j_demos = dataset_return(demos, r_true, mdp.discount());

  report.delta = report.j_optimal - report.j_demos;
  report.bound = report.epsilon_phi + 2.0 * report.epsilon_inf / (1.0 - mdp.discount());
  report.condition_holds = report.delta > report.bound;
  report.extrapolated = report.j_policy > report.j_demos;
  return report;
}

Eigen::VectorXd solve_feasibility(std::span<const HalfspaceConstraint> constraints,
                                  int dim, double margin, std::uint64_t seed,
                                  double radius, int max_iters) {
  Rng rng(derive_seed(seed, {0x66656173ULL}));
  Eigen::VectorXd w = Eigen::VectorXd::Zero(dim);
  for (int it = 0; it < max_iters; ++it) {
    Eigen::VectorXd direction = Eigen::VectorXd::Zero(dim);
    bool feasible = true;
    for (const HalfspaceConstraint& c : constraints) {
      if (w.dot(c.normal) < margin) {
        feasible = false;
        direction += c.normal / std::max(c.normal.norm(), 1e-12);
      }
    }
    if (feasible) return w;
    const double step = 0.5 / std::sqrt(static_cast<double>(it) + 1.0);
    w += step * direction;
    // Tiny jitter breaks the rare symmetric stall.
    if (it > 0 && it % 5000 == 0)
      for (int i = 0; i < dim; ++i) w[i] += 1e-6 * rng.normal();
    const double norm = w.norm();
    if (norm > radius) w *= radius / norm;
  }
  throw ConvergenceFailure("solve_feasibility: no feasible point found", margin);
}

Prop1Report prop1_demo(double delta) {
  if (!(delta > 0.0)) throw DomainError("prop1_demo: delta must be positive");
  const Mdp mdp = make_prop1_mdp(delta, 0.9);
  const double gamma = mdp.discount();

  Prop1Report report;
  report.delta = delta;

  // Enumerate the three relevant deterministic policies (choice at s0; the
  // other states are absorbing).
  auto branch_policy = [&](int action) {
    return Policy::deterministic({action, action, action, action}, 3,
                                 PolicyProvenance::learned);
  };
  const Policy pi_expert = branch_policy(0);
  const Policy pi_2 = branch_policy(1);
  const Policy pi_1 = branch_policy(2);

  const Eigen::VectorXd phi_e = policy_feature_expectations(pi_expert, mdp);
  const Eigen::VectorXd phi_2 = policy_feature_expectations(pi_2, mdp);
  const Eigen::VectorXd phi_1 = policy_feature_expectations(pi_1, mdp);

  // Expert-optimality constraints (strict).
  std::vector<HalfspaceConstraint> expert_constraints;
  expert_constraints.push_back({phi_e - phi_2, true});
  expert_constraints.push_back({phi_e - phi_1, true});

  // The paper's candidate: Rhat(s1) = 1, everything else 0.
  Eigen::VectorXd w_expert_only = Eigen::VectorXd::Zero(4);
  w_expert_only[1] = 1.0;
  const double working_margin = 1e-3;
  bool canonical_feasible = true;
  for (const HalfspaceConstraint& c : expert_constraints)
    if (w_expert_only.dot(c.normal) < working_margin) canonical_feasible = false;
  // Cross-check that the subgradient solver also produces a feasible point.
  const Eigen::VectorXd w_solved =
      solve_feasibility(expert_constraints, 4, working_margin, 17);
  (void)w_solved;

  report.reward_expert_only = w_expert_only;  // one-hot features: weights = rewards
  report.j1_expert_only = policy_return(mdp, pi_1, report.reward_expert_only);
  report.j2_expert_only = policy_return(mdp, pi_2, report.reward_expert_only);
  report.expert_only_equal =
      canonical_feasible && report.j1_expert_only == report.j2_expert_only;

  // Ranking constraints tau* > tau2 > tau1 over two-step trajectories.
  const Eigen::MatrixXd& f = mdp.features();
  const Eigen::VectorXd phi_tau_e = f.row(0).transpose() + gamma * f.row(1).transpose();
  const Eigen::VectorXd phi_tau_2 = f.row(0).transpose() + gamma * f.row(2).transpose();
  const Eigen::VectorXd phi_tau_1 = f.row(0).transpose() + gamma * f.row(3).transpose();
  std::vector<HalfspaceConstraint> ranked_constraints = expert_constraints;
  ranked_constraints.push_back({phi_tau_e - phi_tau_2, true});
  ranked_constraints.push_back({phi_tau_2 - phi_tau_1, true});

  const Eigen::VectorXd w_ranked =
      solve_feasibility(ranked_constraints, 4, working_margin, 17);
  report.reward_ranked = w_ranked;
  report.j1_ranked = policy_return(mdp, pi_1, w_ranked);
  report.j2_ranked = policy_return(mdp, pi_2, w_ranked);
  report.ranking_separates = report.j1_ranked < report.j2_ranked;

  const ValueIterationResult vi_expert_only =
      value_iteration(mdp, report.reward_expert_only);
  const ValueIterationResult vi_ranked = value_iteration(mdp, w_ranked);
  const auto strictly_prefers_a = [](const ValueIterationResult& vi) {
    return vi.policy.greedy_action(0) == 0 &&
           vi.values.q(0, 0) > vi.values.q(0, 1) && vi.values.q(0, 0) > vi.values.q(0, 2);
  };
  report.expert_still_optimal =
      strictly_prefers_a(vi_expert_only) && strictly_prefers_a(vi_ranked);
  return report;
}

DegradationBound degradation_bound(const DegradationModel& model, double epsilon) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0))
    throw DomainError("degradation_bound: epsilon must lie in [0, 1]");
  if (!(model.beta >= 0.0 && model.beta <= 1.0))
    throw DomainError("degradation_bound: beta must lie in [0, 1]");
  if (model.horizon < 1 || model.n_actions < 1)
    throw DomainError("degradation_bound: horizon and action count must be >= 1");
  DegradationBound b;
  const double a = static_cast<double>(model.n_actions);
  b.p_eps_exact = (1.0 - model.beta) * (1.0 - epsilon) + epsilon * (a - 1.0) / a;
  b.p_eps_large_a = 1.0 - model.beta * (1.0 - epsilon);
  b.return_gap_bound =
      static_cast<double>(model.horizon) * model.horizon * b.p_eps_large_a;
  return b;
}

}  // namespace drex
