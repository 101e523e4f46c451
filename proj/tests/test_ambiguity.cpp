#include <doctest.h>

#include <cmath>

#include "drex/ambiguity.hpp"
#include "drex/cloning.hpp"
#include "drex/envs.hpp"

using namespace drex;

TEST_CASE("volume of a single half-space through the origin is one half") {
  AmbiguityProblem problem;
  problem.dim = 2;
  Eigen::VectorXd n(2);
  n << 1.0, 0.3;
  problem.constraints.push_back({n, false});
  const VolumeEstimate est = estimate_volume(problem, 100000, 4);
  CHECK(std::abs(est.fraction - 0.5) < 0.01);
  CHECK(est.std_error > 0.0);
}

TEST_CASE("no constraints leave the whole ball") {
  AmbiguityProblem problem;
  problem.dim = 3;
  const VolumeEstimate est = estimate_volume(problem, 2000, 4);
  CHECK(est.fraction == 1.0);
  CHECK(est.std_error == 0.0);
}

TEST_CASE("two orthogonal constraints leave a quarter") {
  for (const BallType ball : {BallType::l2, BallType::l1}) {
    AmbiguityProblem problem;
    problem.dim = 2;
    problem.ball = ball;
    Eigen::VectorXd e1(2), e2(2);
    e1 << 1, 0;
    e2 << 0, 1;
    problem.constraints.push_back({e1, false});
    problem.constraints.push_back({e2, false});
    const VolumeEstimate est = estimate_volume(problem, 100000, 9);
    CHECK(std::abs(est.fraction - 0.25) < 0.01);
  }
}

TEST_CASE("volume estimation is reproducible and worker-count independent") {
  AmbiguityProblem problem;
  problem.dim = 3;
  Eigen::VectorXd n(3);
  n << 0.3, -1.0, 0.5;
  problem.constraints.push_back({n, true});
  const VolumeEstimate a = estimate_volume(problem, 50000, 11, 1);
  const VolumeEstimate b = estimate_volume(problem, 50000, 11, 4);
  CHECK(a.fraction == b.fraction);
  CHECK_THROWS_AS(estimate_volume(problem, 10, 1), DomainError);
}

TEST_CASE("ranking constraints: pair count, direction and degenerate drops") {
  Eigen::VectorXd phi1(2), phi2(2);
  phi1 << 1, 0;
  phi2 << 0, 1;
  const std::vector<Eigen::VectorXd> two = {phi1, phi2};
  const auto constraints = constraints_from_ranking(two);
  REQUIRE(constraints.size() == 1);
  CHECK((constraints[0].normal - (phi2 - phi1)).lpNorm<Eigen::Infinity>() == 0.0);

  // Equal items: constraint dropped with a count reported.
  int dropped = 0;
  const std::vector<Eigen::VectorXd> equal = {phi1, phi1};
  CHECK(constraints_from_ranking(equal, RankingPairMode::all_pairs, false, &dropped)
            .empty());
  CHECK(dropped == 1);

  // All-pairs on n items is n(n-1)/2 constraints (no degenerates here).
  Eigen::VectorXd phi3(2);
  phi3 << 2, 2;
  const std::vector<Eigen::VectorXd> three = {phi1, phi2, phi3};
  CHECK(constraints_from_ranking(three).size() == 3);
  CHECK(constraints_from_ranking(three, RankingPairMode::adjacent).size() == 2);
}

TEST_CASE("a full ranking's constraint set contains the optimal-policy set") {
  // With the best item on top, all-pairs constraints include every
  // best-vs-other constraint; adding pairs can only shrink the feasible set.
  Rng rng(2);
  Eigen::VectorXd phi_best(3), phi_mid(3), phi_worst(3);
  for (int i = 0; i < 3; ++i) {
    phi_worst[i] = rng.uniform(-1, 1);
    phi_mid[i] = rng.uniform(-1, 1);
    phi_best[i] = rng.uniform(-1, 1);
  }
  const std::vector<Eigen::VectorXd> ranked = {phi_worst, phi_mid, phi_best};
  const auto all = constraints_from_ranking(ranked);

  AmbiguityProblem opt_only;
  opt_only.dim = 3;
  opt_only.constraints.push_back({phi_best - phi_worst, false});
  opt_only.constraints.push_back({phi_best - phi_mid, false});
  AmbiguityProblem full = opt_only;
  full.constraints = all;

  Rng sample_rng(5);
  for (int i = 0; i < 20000; ++i) {
    const Eigen::VectorXd w = sample_in_ball(3, BallType::l2, sample_rng);
    if (satisfies(full, w)) CHECK(satisfies(opt_only, w));
  }
}

TEST_CASE("prop2: ranked ambiguity never exceeds optimal-policy ambiguity") {
  Rng rng(19);
  const Mdp mdp = make_random_mdp(3, 2, 3, 0.9, rng);

  // All eight deterministic policies ranked worst to best by true return.
  std::vector<Policy> policies;
  for (int a0 = 0; a0 < 2; ++a0)
    for (int a1 = 0; a1 < 2; ++a1)
      for (int a2 = 0; a2 < 2; ++a2)
        policies.push_back(
            Policy::deterministic({a0, a1, a2}, 2, PolicyProvenance::learned));
  std::sort(policies.begin(), policies.end(), [&](const Policy& x, const Policy& y) {
    return policy_return(mdp, x, mdp.true_rewards()) <
           policy_return(mdp, y, mdp.true_rewards());
  });

  const Prop2Result result = prop2_compare(mdp, policies, 40000, 3);
  CHECK(result.subset_violations == 0);
  CHECK(result.ambiguity_ranked.fraction <= result.ambiguity_optimal.fraction);

  // Ranking with only the optimal policy's constraints: both sets identical.
  std::vector<Policy> top_only = {policies[0], policies.back()};
  const Prop2Result trivial = prop2_compare(mdp, top_only, 20000, 3);
  CHECK(trivial.ambiguity_ranked.fraction == trivial.ambiguity_optimal.fraction);

  // Precondition: top element must be optimal.
  std::vector<Policy> wrong = {policies.back(), policies.front()};
  CHECK_THROWS_AS(prop2_compare(mdp, wrong, 20000, 3), DomainError);
}

TEST_CASE("corollary 1 constraint counts") {
  CHECK(corollary1_k(50.0).k_real == doctest::Approx(1.0));
  CHECK(corollary1_k(50.0).k_ceil == 1);
  CHECK(corollary1_k(75.0).k_real == doctest::Approx(2.0));
  CHECK(corollary1_k(75.0).k_ceil == 2);
  CHECK(corollary1_k(87.5).k_real == doctest::Approx(3.0));
  CHECK(corollary1_k(87.5).k_ceil == 3);
  CHECK(corollary1_k(0.0).k_real == 0.0);
  CHECK_THROWS_AS(corollary1_k(100.0), DomainError);
  CHECK_THROWS_AS(corollary1_k(120.0), DomainError);
  CHECK_THROWS_AS(corollary1_k(-1.0), DomainError);
}

TEST_CASE("hypothesis elimination halves the survivors per random half-space") {
  const EliminationCurve curve = hypothesis_elimination_sim(1024, 4, 10, 7, 200);
  REQUIRE(curve.mean_remaining.size() == 11);
  CHECK(curve.mean_remaining[0] == 1024.0);
  for (int k = 1; k <= 10; ++k) {
    const double slack = 3.0 * curve.std_error[k] + 1e-9;
    CHECK(std::abs(curve.mean_remaining[k] - curve.predicted[k]) <= slack);
  }
  // Per-step halving of survivors.
  for (int k = 1; k <= 10; ++k) {
    const double prev = curve.mean_remaining[k - 1];
    const double slack = 3.0 * (curve.std_error[k] + 0.5 * curve.std_error[k - 1]) + 0.5;
    CHECK(std::abs(curve.mean_remaining[k] - 0.5 * prev) <= slack);
  }
  // k = 0: everything remains.
  const EliminationCurve none = hypothesis_elimination_sim(64, 3, 0, 5, 10);
  CHECK(none.mean_remaining.size() == 1);
  CHECK(none.mean_remaining[0] == 64.0);
}

TEST_CASE("theorem 1 report for exact recovery reduces to delta > 0") {
  const Mdp mdp = make_lava_world();
  const ValueIterationResult vi = value_iteration(mdp, mdp.true_rewards());
  const RewardModel truth = RewardModel::linear(mdp.true_weights());

  // Demos strictly worse than optimal.
  DemonstratorSpec spec{DemonstratorMode::truncated_vi, 5, 10, 2};
  const std::vector<Trajectory> demos = generate_demonstrations(mdp, spec);

  const TheoremOneReport report = theorem1_check(mdp, truth, vi.policy, demos);
  CHECK(report.epsilon_inf == doctest::Approx(0.0));
  CHECK(report.epsilon_phi == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(report.condition_holds == (report.delta > report.bound));
  CHECK(report.extrapolated);
  CHECK(report.condition_holds);
}

TEST_CASE("theorem 1 rejects non-linear models and rescales heavy weights") {
  const Mdp mdp = make_lava_world();
  Rng rng(1);
  const RewardModel mlp = RewardModel::mlp(mdp.feature_dim(), 4, rng);
  const Policy uniform = Policy::uniform(mdp.n_states(), mdp.n_actions());
  Trajectory t;
  t.steps = {{0, 0}};
  const std::vector<Trajectory> demos = {t};
  CHECK_THROWS_AS(theorem1_check(mdp, mlp, uniform, demos), TheoremInapplicableError);

  Eigen::VectorXd heavy(mdp.feature_dim());
  heavy << 3.0, -2.0, 1.0;
  const TheoremOneReport report =
      theorem1_check(mdp, RewardModel::linear(heavy), uniform, demos);
  CHECK(report.scale == doctest::Approx(1.0 / 6.0));
}

TEST_CASE("theorem 1 implication has no counterexamples on random instances") {
  Rng rng(2024);
  int condition_held = 0;
  for (int instance = 0; instance < 200; ++instance) {
    const Mdp mdp = make_random_mdp(3 + rng.uniform_int(4), 2 + rng.uniform_int(2),
                                    2 + rng.uniform_int(3), 0.9, rng);
    // Estimated reward: true weights plus noise of varying scale (0 => exact).
    const double noise_scale = (instance % 4 == 0) ? 0.0 : 0.02 * rng.uniform();
    Eigen::VectorXd w_hat = mdp.true_weights();
    for (int i = 0; i < w_hat.size(); ++i) w_hat[i] += noise_scale * rng.normal();
    const RewardModel model = RewardModel::linear(w_hat);
    const ValueIterationResult vi_hat =
        value_iteration(mdp, mdp.features() * w_hat);

    // Demos from a noisy policy.
    const ValueIterationResult vi = value_iteration(mdp, mdp.true_rewards());
    const Policy demo_policy = epsilon_greedy_wrap(vi.policy, 0.3 + 0.5 * rng.uniform());
    std::vector<Trajectory> demos;
    Rng demo_rng(rng.next_u64());
    for (int d = 0; d < 5; ++d)
      demos.push_back(sample_trajectory(mdp, demo_policy, 30, demo_rng));

    const TheoremOneReport report = theorem1_check(mdp, model, vi_hat.policy, demos);
    if (report.condition_holds) {
      ++condition_held;
      CHECK(report.extrapolated);
    }
  }
  // The suite must actually exercise the implication.
  CHECK(condition_held > 0);
}

TEST_CASE("a large reward error with a small gap leaves the condition false") {
  const Mdp mdp = make_prop1_mdp(1.0);
  // Badly wrong estimate.
  Eigen::VectorXd w_hat(4);
  w_hat << 0.25, -0.25, 0.25, 0.25;
  const ValueIterationResult vi = value_iteration(mdp, mdp.true_rewards());
  // Demos from the optimal policy: delta is tiny.
  std::vector<Trajectory> demos;
  Rng rng(8);
  for (int d = 0; d < 3; ++d) demos.push_back(sample_trajectory(mdp, vi.policy, 10, rng));
  const TheoremOneReport report =
      theorem1_check(mdp, RewardModel::linear(w_hat), vi.policy, demos);
  CHECK_FALSE(report.condition_holds);
}

TEST_CASE("proposition 1 demo passes its three checks") {
  for (const double delta : {1.0, 10.0, 100.0}) {
    const Prop1Report report = prop1_demo(delta);
    CHECK(report.expert_only_equal);
    CHECK(report.ranking_separates);
    CHECK(report.expert_still_optimal);
    CHECK(report.j1_expert_only == report.j2_expert_only);
    CHECK(report.j1_ranked < report.j2_ranked);
  }
  CHECK_THROWS_AS(prop1_demo(0.0), DomainError);
}

TEST_CASE("degradation model formulas") {
  DegradationModel model;
  model.beta = 0.9;
  model.horizon = 10;
  model.n_actions = 1000000;  // large |A|
  const DegradationBound b = degradation_bound(model, 0.0);
  CHECK(b.p_eps_large_a == doctest::Approx(0.1));

  model.n_actions = 4;
  const DegradationBound at_one = degradation_bound(model, 1.0);
  CHECK(at_one.p_eps_large_a == doctest::Approx(1.0));

  DegradationModel worked{0.8, 10, 4};
  CHECK(degradation_bound(worked, 0.5).return_gap_bound == doctest::Approx(60.0));

  CHECK_THROWS_AS(degradation_bound(model, 1.5), DomainError);
}

TEST_CASE("exact p_eps converges to the large-|A| form") {
  for (double beta : {0.0, 0.3, 0.7, 1.0}) {
    for (double eps : {0.0, 0.25, 0.5, 0.75, 1.0}) {
      for (int a : {2, 4, 16, 256}) {
        const DegradationBound b = degradation_bound({beta, 5, a}, eps);
        CHECK(std::abs(b.p_eps_exact - b.p_eps_large_a) < 1.0 / a + 1e-12);
        // Exact formula, term by term.
        const double expected = (1 - beta) * (1 - eps) + eps * (a - 1.0) / a;
        CHECK(b.p_eps_exact == expected);
      }
    }
  }
}

TEST_CASE("paired volume estimates shrink monotonically as constraints accumulate") {
  Rng rng(99);
  std::vector<HalfspaceConstraint> constraints;
  AmbiguityProblem problem;
  problem.dim = 4;
  double prev = 1.0;
  for (int k = 0; k < 6; ++k) {
    Eigen::VectorXd n(4);
    for (int i = 0; i < 4; ++i) n[i] = rng.normal();
    problem.constraints.push_back({n, false});
    // Same seed => same sample stream => monotone by construction.
    const VolumeEstimate est = estimate_volume(problem, 20000, 1234);
    CHECK(est.fraction <= prev);
    prev = est.fraction;
  }
}
