#include <doctest.h>

#include <cmath>

#include "drex/cloning.hpp"
#include "drex/envs.hpp"
#include "drex/mdp.hpp"
#include "drex/solvers.hpp"

using namespace drex;

namespace {

// Two-state chain: action 0 stays, action 1 moves to the other state.
Mdp two_state(double gamma = 0.9) {
  std::vector<Eigen::MatrixXd> p(2, Eigen::MatrixXd::Zero(2, 2));
  p[0] << 1, 0, 0, 1;
  p[1] << 0, 1, 1, 0;
  Eigen::MatrixXd features = Eigen::MatrixXd::Identity(2, 2);
  Eigen::VectorXd w(2);
  w << 0.5, 0.5;
  Eigen::VectorXd init(2);
  init << 0.5, 0.5;
  return Mdp(std::move(p), std::move(features), std::move(w), gamma, std::move(init));
}

Mdp single_absorbing(double gamma = 0.9) {
  std::vector<Eigen::MatrixXd> p(1, Eigen::MatrixXd::Ones(1, 1));
  Eigen::MatrixXd features(1, 2);
  features << 1, 0;
  Eigen::VectorXd w(2);
  w << 1, 0;
  Eigen::VectorXd init(1);
  init << 1;
  return Mdp(std::move(p), std::move(features), std::move(w), gamma, std::move(init));
}

Trajectory traj_of(std::vector<int> states) {
  Trajectory t;
  for (int s : states) t.steps.push_back({s, 0});
  return t;
}

}  // namespace

TEST_CASE("trajectory return is the discounted state-reward sum") {
  Eigen::VectorXd reward(1);
  reward << 1.0;
  CHECK(trajectory_return(traj_of({0, 0, 0}), reward, 0.9) == doctest::Approx(2.71));

  Eigen::VectorXd zero = Eigen::VectorXd::Zero(3);
  CHECK(trajectory_return(traj_of({0, 1, 2}), zero, 0.9) == 0.0);

  Eigen::VectorXd r3(3);
  r3 << 0.3, -2.0, 5.0;
  CHECK(trajectory_return(traj_of({1}), r3, 0.5) == doctest::Approx(-2.0));
}

TEST_CASE("trajectory return rejects out-of-range states and empty input") {
  Eigen::VectorXd reward = Eigen::VectorXd::Zero(2);
  CHECK_THROWS_AS(trajectory_return(traj_of({0, 5}), reward, 0.9), ValidationError);
  CHECK_THROWS_AS(trajectory_return(Trajectory{}, reward, 0.9), ValidationError);
}

TEST_CASE("trajectory return is linear in the reward") {
  Rng rng(7);
  Eigen::VectorXd r1(4), r2(4);
  for (int i = 0; i < 4; ++i) {
    r1[i] = rng.uniform(-1, 1);
    r2[i] = rng.uniform(-1, 1);
  }
  const Trajectory t = traj_of({0, 3, 2, 2, 1});
  const double a = 1.7, b = -0.4;
  CHECK(trajectory_return(t, (a * r1 + b * r2).eval(), 0.8) ==
        doctest::Approx(a * trajectory_return(t, r1, 0.8) +
                        b * trajectory_return(t, r2, 0.8)).epsilon(1e-12));
}

TEST_CASE("dataset return averages trajectory returns") {
  Eigen::VectorXd reward(2);
  reward << 2.0, 4.0;
  const std::vector<Trajectory> two = {traj_of({0}), traj_of({1})};
  CHECK(dataset_return(two, reward, 0.9) == doctest::Approx(3.0));

  const std::vector<Trajectory> one = {traj_of({1})};
  CHECK(dataset_return(one, reward, 0.9) == doctest::Approx(4.0));

  const std::vector<Trajectory> five(5, traj_of({0, 0}));
  CHECK(dataset_return(five, reward, 0.5) == doctest::Approx(3.0));

  CHECK_THROWS_AS(dataset_return(std::vector<Trajectory>{}, reward, 0.9),
                  EmptyDatasetError);
}

TEST_CASE("feature expectations: absorbing state gives the geometric series") {
  const Mdp mdp = single_absorbing(0.9);
  const Policy pi = Policy::uniform(1, 1);
  const Eigen::VectorXd phi = policy_feature_expectations(pi, mdp);
  CHECK(phi[0] == doctest::Approx(10.0).epsilon(1e-10));
  CHECK(phi[1] == doctest::Approx(0.0));
}

TEST_CASE("feature expectations: symmetric two-state chain is balanced") {
  const Mdp mdp = two_state(0.9);
  const Policy pi = Policy::uniform(2, 2);
  const Eigen::VectorXd phi = policy_feature_expectations(pi, mdp);
  CHECK(phi[0] == doctest::Approx(phi[1]).epsilon(1e-12));
}

TEST_CASE("feature expectations match a Monte Carlo oracle on a 3-state chain") {
  // Deterministic right-moving chain with an absorbing end.
  std::vector<Eigen::MatrixXd> p(2, Eigen::MatrixXd::Zero(3, 3));
  p[0] << 0, 1, 0, 0, 0, 1, 0, 0, 1;  // advance
  p[1] << 1, 0, 0, 1, 0, 0, 0, 0, 1;  // retreat
  Eigen::MatrixXd features = Eigen::MatrixXd::Identity(3, 3);
  Eigen::VectorXd w(3);
  w << 0.2, 0.3, 0.5;
  Eigen::VectorXd init(3);
  init << 1, 0, 0;
  const Mdp mdp(std::move(p), std::move(features), std::move(w), 0.5, std::move(init));
  const Policy pi = Policy::deterministic({0, 0, 0}, 2, PolicyProvenance::optimal);

  // Exact infinite-horizon solve vs 1e6 sampled rollouts long enough that the
  // discounted tail is negligible.
  const Eigen::VectorXd exact = policy_feature_expectations(pi, mdp);
  Rng rng(123);
  const auto [mc, se] = monte_carlo_feature_expectations(mdp, pi, 40, 1000000, rng);
  for (int i = 0; i < 3; ++i) {
    const double slack = 3.0 * se[i] + 1e-9;
    CHECK(std::abs(mc[i] - exact[i]) <= slack);
  }
}

TEST_CASE("finite-horizon feature expectations follow the backward recursion") {
  const Mdp mdp = two_state(0.9);
  const Policy pi = Policy::deterministic({1, 1}, 2, PolicyProvenance::optimal);
  // Horizon 1: just the initial features.
  const Eigen::VectorXd phi1 = policy_feature_expectations(pi, mdp, 1);
  CHECK(phi1[0] == doctest::Approx(0.5));
  CHECK(phi1[1] == doctest::Approx(0.5));
  // Horizon 2 under the swap action: phi + gamma * swapped phi.
  const Eigen::VectorXd phi2 = policy_feature_expectations(pi, mdp, 2);
  CHECK(phi2[0] == doctest::Approx(0.5 + 0.9 * 0.5));
  CHECK(phi2[1] == doctest::Approx(0.5 + 0.9 * 0.5));
}

TEST_CASE("w . Phi_pi agrees with iterative policy evaluation") {
  Rng rng(42);
  for (int round = 0; round < 20; ++round) {
    const Mdp mdp = make_random_mdp(3 + rng.uniform_int(4), 2 + rng.uniform_int(2),
                                    2 + rng.uniform_int(3), 0.9, rng);
    // Random stochastic policy.
    Policy pi;
    pi.action_probs.resize(mdp.n_states(), mdp.n_actions());
    for (int s = 0; s < mdp.n_states(); ++s) {
      double sum = 0.0;
      for (int a = 0; a < mdp.n_actions(); ++a) {
        pi.action_probs(s, a) = rng.uniform() + 1e-3;
        sum += pi.action_probs(s, a);
      }
      pi.action_probs.row(s) /= sum;
    }
    Eigen::VectorXd w(mdp.feature_dim());
    for (int i = 0; i < w.size(); ++i) w[i] = rng.uniform(-1, 1);

    const double via_phi = w.dot(policy_feature_expectations(pi, mdp));
    const Eigen::VectorXd v =
        policy_value_iterative(mdp, pi, mdp.features() * w, 1e-13);
    const double via_eval = mdp.initial_distribution().dot(v);
    CHECK(std::abs(via_phi - via_eval) < 1e-8);
  }
}

TEST_CASE("epsilon-mixture feature expectations interpolate between endpoints") {
  // Stay/advance chain where each feature coordinate moves monotonically with
  // the mixing level, checked against endpoint Monte Carlo estimates.
  std::vector<Eigen::MatrixXd> p(2, Eigen::MatrixXd::Zero(2, 2));
  p[0] << 1, 0, 0, 1;  // stay
  p[1] << 0, 1, 0, 1;  // advance; state 1 absorbs
  Eigen::MatrixXd features = Eigen::MatrixXd::Identity(2, 2);
  Eigen::VectorXd w(2);
  w << 1, 0;
  Eigen::VectorXd init(2);
  init << 1, 0;
  const Mdp mdp(std::move(p), std::move(features), std::move(w), 0.9, std::move(init));
  const Policy base = Policy::deterministic({1, 1}, 2, PolicyProvenance::cloned);

  const int length = 60, rollouts = 4000;
  Rng rng0(1), rng1(2), rng_mid(3);
  const auto [lo, lo_se] = monte_carlo_feature_expectations(
      mdp, epsilon_greedy_wrap(base, 0.0), length, rollouts, rng0);
  const auto [hi, hi_se] = monte_carlo_feature_expectations(
      mdp, epsilon_greedy_wrap(base, 1.0), length, rollouts, rng1);
  const auto [mid, mid_se] = monte_carlo_feature_expectations(
      mdp, epsilon_greedy_wrap(base, 0.5), length, rollouts, rng_mid);
  for (int i = 0; i < 2; ++i) {
    const double lo_end = std::min(lo[i], hi[i]);
    const double hi_end = std::max(lo[i], hi[i]);
    const double slack = 3.0 * (lo_se[i] + hi_se[i] + mid_se[i]) + 1e-9;
    CHECK(mid[i] >= lo_end - slack);
    CHECK(mid[i] <= hi_end + slack);
  }
}

TEST_CASE("mdp construction validates invariants") {
  std::vector<Eigen::MatrixXd> p(1, Eigen::MatrixXd::Ones(1, 1));
  Eigen::MatrixXd features(1, 1);
  features << 1;
  Eigen::VectorXd w(1);
  w << 1;
  Eigen::VectorXd init(1);
  init << 1;

  CHECK_THROWS_AS(Mdp(p, features, w, 1.0, init), ValidationError);  // gamma < 1

  std::vector<Eigen::MatrixXd> bad = p;
  bad[0](0, 0) = 0.5;  // row sum != 1
  CHECK_THROWS_AS(Mdp(bad, features, w, 0.9, init), ValidationError);

  Eigen::VectorXd bad_init(1);
  bad_init << 0.7;
  CHECK_THROWS_AS(Mdp(p, features, w, 0.9, bad_init), ValidationError);
}

TEST_CASE("true weights are scaled to unit l1 norm on construction") {
  std::vector<Eigen::MatrixXd> p(1, Eigen::MatrixXd::Ones(1, 1));
  Eigen::MatrixXd features(1, 2);
  features << 1, 1;
  Eigen::VectorXd w(2);
  w << 3.0, -1.0;
  Eigen::VectorXd init(1);
  init << 1;
  const Mdp mdp(std::move(p), std::move(features), std::move(w), 0.9, std::move(init));
  CHECK(mdp.true_weights().lpNorm<1>() == doctest::Approx(1.0));
  CHECK(mdp.weight_scale() == doctest::Approx(0.25));
  CHECK(mdp.true_weights()[0] == doctest::Approx(0.75));
}

TEST_CASE("trajectory validation honors the horizon") {
  std::vector<Eigen::MatrixXd> p(1, Eigen::MatrixXd::Ones(1, 1));
  Eigen::MatrixXd features(1, 1);
  features << 1;
  Eigen::VectorXd w(1);
  w << 1;
  Eigen::VectorXd init(1);
  init << 1;
  const Mdp mdp(std::move(p), std::move(features), std::move(w), 0.9, std::move(init), 3);
  CHECK_NOTHROW(mdp.check_trajectory(traj_of({0, 0, 0})));
  CHECK_THROWS_AS(mdp.check_trajectory(traj_of({0, 0, 0, 0})), ValidationError);
}
