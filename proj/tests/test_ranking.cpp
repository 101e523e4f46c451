#include <doctest.h>

#include "drex/ranking.hpp"

using namespace drex;

namespace {

Trajectory traj_of(std::vector<int> states, double eps) {
  Trajectory t;
  for (int s : states) t.steps.push_back({s, 0});
  t.noise_level = eps;
  return t;
}

std::vector<RolloutGroup> groups_for(const std::vector<double>& levels, int k,
                                     int length = 20) {
  std::vector<RolloutGroup> groups;
  int state = 0;
  for (double eps : levels) {
    RolloutGroup g;
    g.epsilon = eps;
    for (int i = 0; i < k; ++i) {
      std::vector<int> states(length, state % 3);
      g.trajectories.push_back(traj_of(states, eps));
      ++state;
    }
    groups.push_back(std::move(g));
  }
  return groups;
}

}  // namespace

TEST_CASE("cross-level pairs form the full product") {
  const RankedDataset d = build_ranked_dataset(groups_for({1.0, 0.5}, 2), 0.0);
  CHECK(d.pairs.size() == 4);
  for (const auto& [worse, better] : d.pairs) {
    CHECK(d.noise_of(worse) == doctest::Approx(1.0));
    CHECK(d.noise_of(better) == doctest::Approx(0.5));
  }
}

TEST_CASE("a single level cannot be ranked") {
  CHECK_THROWS_AS(build_ranked_dataset(groups_for({0.5}, 3), 0.0),
                  InsufficientLevelsError);
  // Two groups at the same level are still one level.
  CHECK_THROWS_AS(build_ranked_dataset(groups_for({0.5, 0.5}, 3), 0.0),
                  InsufficientLevelsError);
}

TEST_CASE("min_gap filters near-equal levels") {
  const RankedDataset d = build_ranked_dataset(groups_for({0.9, 0.7, 0.5}, 3), 0.3);
  // Only (0.9, 0.5) clears the 0.3 gap: K^2 pairs.
  CHECK(d.pairs.size() == 9);
  for (const auto& [worse, better] : d.pairs) {
    CHECK(d.noise_of(worse) == doctest::Approx(0.9));
    CHECK(d.noise_of(better) == doctest::Approx(0.5));
  }
}

TEST_CASE("equal-level trajectories never pair") {
  const RankedDataset d = build_ranked_dataset(groups_for({1.0, 0.5}, 3), 0.0);
  for (const auto& [worse, better] : d.pairs)
    CHECK(d.noise_of(worse) != d.noise_of(better));
}

TEST_CASE("full-length snippets are whole trajectories") {
  const RankedDataset d = build_ranked_dataset(groups_for({1.0, 0.5}, 2, 15), 0.0);
  SnippetConfig config;
  config.n_pairs = 50;
  config.len_min = 15;
  config.len_max = 15;
  const auto pairs = sample_snippet_pairs(d, config, 1);
  CHECK(pairs.size() == 50);
  for (const SnippetPair& p : pairs) {
    CHECK(p.worse.length() == 15);
    CHECK(p.better.length() == 15);
    CHECK(p.worse.start == 0);
    CHECK(p.better.start == 0);
  }
}

TEST_CASE("progress constraint holds on every sampled pair") {
  const RankedDataset d = build_ranked_dataset(groups_for({1.0, 0.6, 0.2}, 4, 30), 0.0);
  SnippetConfig config;
  config.n_pairs = 10000;
  config.len_min = 5;
  config.len_max = 12;
  config.progress = true;
  const auto pairs = sample_snippet_pairs(d, config, 7);
  for (const SnippetPair& p : pairs) CHECK(p.better.start >= p.worse.start);
}

TEST_CASE("snippet lengths respect the configured bounds") {
  const RankedDataset d = build_ranked_dataset(groups_for({1.0, 0.4}, 3, 25), 0.0);
  SnippetConfig config;
  config.n_pairs = 2000;
  config.len_min = 6;
  config.len_max = 14;
  const auto pairs = sample_snippet_pairs(d, config, 9);
  for (const SnippetPair& p : pairs) {
    CHECK(p.worse.length() >= 6);
    CHECK(p.worse.length() <= 14);
    CHECK(p.better.length() == p.worse.length());  // equal-length default
  }
}

TEST_CASE("too-short trajectories are skipped, error when none are usable") {
  auto groups = groups_for({1.0, 0.5}, 2, 4);
  // One usable long trajectory at the noisy level.
  groups[0].trajectories.push_back(traj_of(std::vector<int>(20, 1), 1.0));
  const RankedDataset d = build_ranked_dataset(groups, 0.0);
  SnippetConfig config;
  config.n_pairs = 100;
  config.len_min = 10;
  config.len_max = 20;
  CHECK_THROWS_AS(sample_snippet_pairs(d, config, 3), ValidationError);

  // With long trajectories on both sides sampling succeeds and only uses them.
  auto groups2 = groups_for({1.0, 0.5}, 2, 4);
  groups2[0].trajectories.push_back(traj_of(std::vector<int>(20, 1), 1.0));
  groups2[1].trajectories.push_back(traj_of(std::vector<int>(20, 2), 0.5));
  const RankedDataset d2 = build_ranked_dataset(groups2, 0.0);
  const auto pairs = sample_snippet_pairs(d2, config, 3);
  for (const SnippetPair& p : pairs) {
    CHECK(p.worse.length() >= 10);
    CHECK(p.better.length() >= 10);
  }
}

TEST_CASE("the paper-scale default asks for 40000 pairs") {
  CHECK(SnippetConfig{}.n_pairs == 40000);
}

TEST_CASE("dataset construction is a pure function of its inputs") {
  const RankedDataset a = build_ranked_dataset(groups_for({1.0, 0.5, 0.2}, 3), 0.1);
  const RankedDataset b = build_ranked_dataset(groups_for({1.0, 0.5, 0.2}, 3), 0.1);
  CHECK(a.pairs == b.pairs);
  SnippetConfig config;
  config.n_pairs = 200;
  config.len_min = 5;
  config.len_max = 20;
  const auto p1 = sample_snippet_pairs(a, config, 42);
  const auto p2 = sample_snippet_pairs(b, config, 42);
  REQUIRE(p1.size() == p2.size());
  for (std::size_t i = 0; i < p1.size(); ++i) {
    CHECK(p1[i].worse.states == p2[i].worse.states);
    CHECK(p1[i].better.states == p2[i].better.states);
  }
}
