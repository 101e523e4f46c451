#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "drex/ambiguity.hpp"
#include "drex/cloning.hpp"
#include "drex/envs.hpp"
#include "drex/mdp.hpp"
#include "drex/ranking.hpp"
#include "drex/reward.hpp"
#include "drex/solvers.hpp"

namespace drex {

struct EvaluationConfig {
  int rollouts = 100;
  int degradation_rollouts = 150;
  int heldout_rollouts = 5;  // per held-out policy
  std::vector<int> policy_seeds = {0, 1, 2};
};

// Full description of one experiment; see README for the JSON schema.
struct ExperimentConfig {
  std::string environment = "terrain8";  // built-in name or MDP file path
  std::uint64_t seed = 0;
  int workers = 1;
  std::string output_dir = "out";
  DemonstratorSpec demonstrator;
  BcConfig cloning;
  NoiseSchedule schedule = NoiseSchedule::even(20, 5);
  double min_gap = 0.0;
  SnippetConfig snippets;
  ModelSpec model;
  TrainConfig training;
  SolverConfig solver;
  EvaluationConfig evaluation;
};

ExperimentConfig default_config(const std::string& env_name);
std::string config_to_json(const ExperimentConfig& config);
ExperimentConfig config_from_json(const std::string& text);

// Built-in name, config file path, or MDP file path.
Mdp resolve_environment(const std::string& environment);

// One summary row; seed_label is a policy-optimization seed, "best" for the
// selected best-of-seeds row, or "-" for methods without a policy stage.
struct MethodStats {
  std::string method;
  std::string seed_label;
  double mean_return = 0.0;
  double std_return = 0.0;
  double best_return = 0.0;
  double worst_return = 0.0;
  bool beats_demo_avg = false;
  bool beats_demo_best = false;
};

struct EvaluationSummary {
  std::vector<MethodStats> rows;
  double demo_avg = 0.0;
  double demo_best = 0.0;

  // The selected row for a method ("best" when present, else the single row).
  const MethodStats& selected(const std::string& method) const;
};

struct DrexRun {
  std::vector<Trajectory> demos;
  ClonedPolicy cloned;
  std::vector<RolloutGroup> rollouts;
  std::vector<DegradationRow> degradation;
  RankedDataset ranked;
  std::vector<SnippetPair> pairs;
  RewardFunction reward;
  std::vector<OptimizeResult> policies;  // one per policy seed
  int best_policy = 0;
  ExtrapolationReport extrapolation;
  EvaluationSummary summary;
};

// Algorithm lines 1-7 end to end, plus baselines and evaluation. Deterministic
// for a fixed (config, seed): stage seeds are derived from config.seed.
DrexRun run_drex(const ExperimentConfig& config);

// Baseline entries evaluated with the same protocol as run_drex.
std::vector<MethodStats> run_baseline_bc(const ExperimentConfig& config);
std::vector<MethodStats> run_baseline_livelong(const ExperimentConfig& config);

// Writes summary.csv, degradation.csv, training_curve.csv, extrapolation.csv
// and extrapolation_summary.csv into the output directory.
void emit_report(const DrexRun& run, const std::filesystem::path& output_dir);

// Evaluation helper shared by the baselines: statistics of rollout returns
// under the true reward.
MethodStats evaluate_policy(const Mdp& mdp, const Policy& policy,
                            const std::string& method, const std::string& seed_label,
                            int rollouts, std::uint64_t seed);

// Stage seed streams (exposed so staged CLI replays match run_drex exactly).
namespace stage_seed {
inline constexpr std::uint64_t demos = 1;
inline constexpr std::uint64_t rollouts = 2;
inline constexpr std::uint64_t degradation = 3;
inline constexpr std::uint64_t pairs = 4;
inline constexpr std::uint64_t training = 5;
inline constexpr std::uint64_t policy = 6;
inline constexpr std::uint64_t evaluation = 7;
inline constexpr std::uint64_t heldout = 8;
}  // namespace stage_seed

}  // namespace drex
