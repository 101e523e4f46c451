#include <doctest.h>

#include <filesystem>

#include "drex/pipeline.hpp"
#include "drex/serialize.hpp"

using namespace drex;
namespace fs = std::filesystem;

namespace {

// Small-budget config so pipeline tests stay fast.
ExperimentConfig quick_config(const std::string& env) {
  ExperimentConfig config = default_config(env);
  config.schedule = NoiseSchedule::even(6, 3);
  config.snippets.n_pairs = 300;
  config.training.max_epochs = 60;
  config.solver.q.episodes = 800;
  config.evaluation.rollouts = 40;
  config.evaluation.degradation_rollouts = 40;
  config.evaluation.policy_seeds = {0, 1};
  return config;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("run_drex emits byte-identical artifacts for a fixed config and seed") {
  const ExperimentConfig config = quick_config("lava5");
  TempDir a("drex_test_run_a"), b("drex_test_run_b");
  emit_report(run_drex(config), a.path);
  emit_report(run_drex(config), b.path);
  for (const char* name : {"summary.csv", "degradation.csv", "training_curve.csv",
                           "extrapolation.csv", "extrapolation_summary.csv"}) {
    CAPTURE(name);
    CHECK(read_text_file(a.path / name) == read_text_file(b.path / name));
  }
}

TEST_CASE("a single noise level fails at the ranking stage") {
  ExperimentConfig config = quick_config("lava5");
  config.schedule.levels = {0.5};
  try {
    run_drex(config);
    FAIL("expected InsufficientLevelsError");
  } catch (const InsufficientLevelsError& e) {
    CHECK(std::string(e.what()).find("[stage rank]") != std::string::npos);
  }
}

TEST_CASE("summary carries every method with the documented flags") {
  const ExperimentConfig config = quick_config("lava5");
  const DrexRun run = run_drex(config);

  for (const char* method : {"demonstrations", "drex", "bc", "live-long", "random",
                             "optimal"}) {
    CAPTURE(method);
    bool found = false;
    for (const MethodStats& row : run.summary.rows) found |= row.method == method;
    CHECK(found);
  }
  // Per-seed rows plus a best row for the policy-stage methods.
  int drex_rows = 0, livelong_rows = 0;
  for (const MethodStats& row : run.summary.rows) {
    if (row.method == "drex") ++drex_rows;
    if (row.method == "live-long") ++livelong_rows;
  }
  CHECK(drex_rows == 3);  // seeds 0, 1 + best
  CHECK(livelong_rows == 3);

  // Flags are consistent with the recorded demo statistics.
  for (const MethodStats& row : run.summary.rows) {
    CHECK(row.beats_demo_avg == (row.mean_return > run.summary.demo_avg));
    CHECK(row.beats_demo_best == (row.mean_return > run.summary.demo_best));
  }

  // The optimal policy dominates every other method up to evaluation noise.
  const MethodStats& optimal = run.summary.selected("optimal");
  for (const MethodStats& row : run.summary.rows)
    CHECK(optimal.mean_return >=
          row.mean_return - 3.0 * (row.std_return + optimal.std_return) /
                                std::sqrt(static_cast<double>(config.evaluation.rollouts)));
}

TEST_CASE("bc baseline mirrors the demonstrator and never beats exact optimal") {
  const ExperimentConfig config = quick_config("lava5");
  const auto rows = run_baseline_bc(config);
  REQUIRE(rows.size() == 1);
  const Mdp mdp = resolve_environment(config.environment);
  const ValueIterationResult vi = value_iteration(mdp, mdp.true_rewards());
  const double j_opt = policy_return_default(mdp, vi.policy, mdp.true_rewards());
  CHECK(rows[0].mean_return <= j_opt);

  // Cloning optimal rollouts directly gives a near-optimal clone (sanity).
  Rng rng(31);
  std::vector<Trajectory> optimal_demos;
  for (int i = 0; i < 20; ++i)
    optimal_demos.push_back(sample_trajectory(mdp, vi.policy, *mdp.horizon(), rng));
  const ClonedPolicy clone = behavioral_cloning(mdp, optimal_demos, {});
  const double j_clone =
      policy_return_default(mdp, epsilon_greedy_wrap(clone.policy, 0.0), mdp.true_rewards());
  CHECK(j_clone >= j_opt - 0.15 * std::abs(j_opt));
}

TEST_CASE("live-long rows differ from drex rows only by the method tag (schema)") {
  const ExperimentConfig config = quick_config("lava5");
  const DrexRun run = run_drex(config);
  const MethodStats& drex = run.summary.selected("drex");
  const MethodStats& livelong = run.summary.selected("live-long");
  CHECK(drex.seed_label == livelong.seed_label);  // both report a best row
}

TEST_CASE("emit_report writes the documented headers and is idempotent") {
  const ExperimentConfig config = quick_config("lava5");
  const DrexRun run = run_drex(config);
  TempDir dir("drex_test_emit");
  emit_report(run, dir.path);
  const std::string first = read_text_file(dir.path / "summary.csv");
  CHECK(first.rfind("method,seed_policy,mean_return,std_return,best_return,"
                    "worst_return,beats_demo_avg,beats_demo_best\n", 0) == 0);
  CHECK(read_text_file(dir.path / "degradation.csv")
            .rfind("epsilon,mean_return,std_return,n_rollouts\n", 0) == 0);
  CHECK(read_text_file(dir.path / "training_curve.csv")
            .rfind("epoch,train_loss,val_loss\n", 0) == 0);
  emit_report(run, dir.path);
  CHECK(read_text_file(dir.path / "summary.csv") == first);

  DrexRun empty;
  CHECK_THROWS_AS(emit_report(empty, dir.path), EmptyDatasetError);
}

TEST_CASE("stages replay identically from serialized intermediates") {
  const ExperimentConfig config = quick_config("lava5");
  const Mdp mdp = resolve_environment(config.environment);

  // In-memory run.
  const DrexRun run = run_drex(config);

  // Staged replay: each stage consumes the previous stage's serialized output.
  DemonstratorSpec spec = config.demonstrator;
  spec.seed = derive_seed(config.seed, {stage_seed::demos});
  const std::vector<Trajectory> demos =
      trajectories_from_json(trajectories_to_json(generate_demonstrations(mdp, spec)));
  CHECK(demos == run.demos);

  const ClonedPolicy cloned = behavioral_cloning(mdp, demos, config.cloning);
  const Policy cloned_back = policy_from_json(policy_to_json(cloned.policy));
  CHECK(cloned_back.action_probs == run.cloned.policy.action_probs);

  const auto groups = rollout_groups_from_json(rollout_groups_to_json(noisy_rollouts(
      cloned_back, mdp, config.schedule, derive_seed(config.seed, {stage_seed::rollouts}),
      config.workers)));
  const RankedDataset ranked =
      ranked_dataset_from_json(ranked_dataset_to_json(build_ranked_dataset(groups, config.min_gap)));
  CHECK(ranked.pairs == run.ranked.pairs);

  const auto pairs = sample_snippet_pairs(ranked, config.snippets,
                                          derive_seed(config.seed, {stage_seed::pairs}));
  REQUIRE(pairs.size() == run.pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    CHECK(pairs[i].worse.states == run.pairs[i].worse.states);
    CHECK(pairs[i].better.states == run.pairs[i].better.states);
  }

  const RewardFunction reward = reward_function_from_json(reward_function_to_json(
      train_reward_ensemble(mdp, pairs, config.model, config.training,
                            derive_seed(config.seed, {stage_seed::training}))));
  CHECK(reward.state_rewards(mdp) == run.reward.state_rewards(mdp));
}

TEST_CASE("environment resolution falls back to MDP files") {
  TempDir dir("drex_test_env");
  const Mdp mdp = make_prop1_mdp();
  write_text_file(dir.path / "custom.json", mdp_to_json(mdp));
  const Mdp loaded = resolve_environment((dir.path / "custom.json").string());
  CHECK(loaded.n_states() == 4);
  CHECK_THROWS(resolve_environment("no-such-env"));
}
