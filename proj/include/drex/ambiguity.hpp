#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "drex/mdp.hpp"
#include "drex/reward.hpp"
#include "drex/solvers.hpp"

namespace drex {

// One pairwise constraint over reward weights: w . normal >= 0, or > 0 when
// strict (trajectory rankings are strict, policy-optimality constraints are
// not). Monte Carlo membership treats strict constraints as >= 1e-9.
struct HalfspaceConstraint {
  Eigen::VectorXd normal;
  bool strict = false;
};

enum class BallType { l1, l2 };

// Feasible-reward-set description: constraints intersected with a unit norm
// ball so the volume is bounded.
struct AmbiguityProblem {
  int dim = 0;
  std::vector<HalfspaceConstraint> constraints;
  BallType ball = BallType::l2;
};

struct VolumeEstimate {
  double fraction = 0.0;   // share of the ball satisfying all constraints
  double std_error = 0.0;  // binomial standard error
  int n_samples = 0;
};

Eigen::VectorXd sample_in_ball(int dim, BallType ball, Rng& rng);

bool satisfies(const AmbiguityProblem& problem, const Eigen::VectorXd& w);

// Monte Carlo rejection estimate of G(H) as a fraction of the ball volume.
VolumeEstimate estimate_volume(const AmbiguityProblem& problem, int n_samples,
                               std::uint64_t seed, int workers = 1);

enum class RankingPairMode { adjacent, all_pairs };

// Half-space constraints induced by a ranking. Items are ordered worst to
// best; each generated constraint has normal Phi_better - Phi_worse. Zero
// normals (identical feature expectations) are dropped; their count is
// returned through dropped when given.
std::vector<HalfspaceConstraint> constraints_from_ranking(
    std::span<const Eigen::VectorXd> feature_expectations_worst_to_best,
    RankingPairMode mode = RankingPairMode::all_pairs, bool strict = false,
    int* dropped = nullptr);

struct Prop2Result {
  VolumeEstimate ambiguity_optimal;  // G(H_pi*)
  VolumeEstimate ambiguity_ranked;   // G(H_ranked)
  int shared_samples = 0;
  // Count of samples inside H_ranked but not H_pi*; zero by construction.
  int subset_violations = 0;
};

// Compares the reward ambiguity of IRL on the optimal policy against a total
// ranking, with both memberships evaluated on the same sample set so the
// subset relation H_ranked <= H_pi* holds sample-wise. The ranking is given
// worst to best and must have the optimal policy on top (last).
Prop2Result prop2_compare(const Mdp& mdp, std::span<const Policy> ranking_worst_to_best,
                          int n_samples, std::uint64_t seed,
                          BallType ball = BallType::l2);

struct Corollary1Result {
  double k_real = 0.0;
  int k_ceil = 0;
};

// Number of random half-space constraints sufficient to cut reward ambiguity
// by x percent: k = log2(1 / (1 - x/100)).
Corollary1Result corollary1_k(double x_percent);

struct EliminationCurve {
  // Index k: statistics of |J_k| after k random half-spaces (index 0 = J_0).
  std::vector<double> mean_remaining;
  std::vector<double> std_error;
  std::vector<double> predicted;  // J_0 / 2^k
};

// Empirical check of the discrete-hypothesis recurrence J_k = J_0 / 2^k:
// hypotheses drawn uniformly in the ball, half-space normals uniformly on the
// sphere; a hypothesis j is eliminated by x when j . x <= 0.
EliminationCurve hypothesis_elimination_sim(int j0, int dim, int k, std::uint64_t seed,
                                            int n_trials);

struct TheoremOneReport {
  double delta = 0.0;         // J(pi*|R*) - J(D|R*)
  double epsilon_phi = 0.0;   // ||Phi_pi* - Phi_pihat||_inf
  double epsilon_inf = 0.0;   // sup_s |R*(s) - Rhat(s)|
  double bound = 0.0;         // epsilon_phi + 2 epsilon_inf / (1 - gamma)
  bool condition_holds = false;
  bool extrapolated = false;  // J(pihat|R*) > J(D|R*)
  double scale = 1.0;         // factor applied to Rhat and R* for ||w||_1 <= 1
  double j_optimal = 0.0;     // scaled
  double j_policy = 0.0;      // scaled J(pihat|R*)
  double j_demos = 0.0;       // scaled J(D|R*)
};

// Evaluates the extrapolation condition exactly on a tabular instance. The
// model must be linear (the theorem is stated for linear reward estimates);
// both rewards are rescaled together so the estimate satisfies ||w||_1 <= 1.
// Infinite-horizon quantities throughout.
TheoremOneReport theorem1_check(const Mdp& mdp, const RewardModel& reward_hat,
                                const Policy& policy_hat,
                                std::span<const Trajectory> demos);

struct Prop1Report {
  double delta = 0.0;
  // Expert-only IRL admits a reward with equal returns for the two non-expert
  // policies.
  bool expert_only_equal = false;
  // Adding the ranking tau* > tau2 > tau1 separates them.
  bool ranking_separates = false;
  // The expert stays optimal under both learned rewards.
  bool expert_still_optimal = false;
  Eigen::VectorXd reward_expert_only;  // per state
  Eigen::VectorXd reward_ranked;       // per state
  double j1_expert_only = 0.0, j2_expert_only = 0.0;
  double j1_ranked = 0.0, j2_ranked = 0.0;
};

// Builds the three-action counterexample MDP (R*(s1)=1, R*(s2)=0,
// R*(s3)=-delta), verifies that expert-only IRL admits a reward blind to the
// s2/s3 gap, then re-solves with ranking constraints and verifies the gap
// appears while the expert stays optimal.
Prop1Report prop1_demo(double delta = 10.0);

struct DegradationModel {
  double beta = 1.0;  // probability the clone takes the optimal action
  int horizon = 1;
  int n_actions = 2;
};

struct DegradationBound {
  double p_eps_exact = 0.0;    // (1-beta)(1-eps) + eps(|A|-1)/|A|
  double p_eps_large_a = 0.0;  // 1 - beta(1-eps)
  double return_gap_bound = 0.0;  // T^2 (1 - beta(1-eps))
};

DegradationBound degradation_bound(const DegradationModel& model, double epsilon);

// Feasibility solver used by prop1_demo: finds w with ||w||_2 <= radius and
// w . normal >= margin for every constraint, by projected subgradient.
// Exposed for tests.
Eigen::VectorXd solve_feasibility(std::span<const HalfspaceConstraint> constraints,
                                  int dim, double margin, std::uint64_t seed,
                                  double radius = 1.0, int max_iters = 20000);

}  // namespace drex
