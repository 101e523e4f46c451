#include "drex/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

#include <json.hpp>

#include "drex/serialize.hpp"
#include "drex/stats.hpp"

namespace drex {

using nlohmann::json;

namespace {

// Re-throws a module error with the Algorithm-1 stage name prefixed, keeping
// the dynamic type for the ones callers dispatch on.
template <typename Fn>
auto stage(const std::string& name, Fn&& fn) -> decltype(fn()) {
  auto prefix = [&name](const Error& e) { return "[stage " + name + "] " + e.what(); };
  try {
    return fn();
  } catch (const InsufficientLevelsError& e) {
    throw InsufficientLevelsError(prefix(e));
  } catch (const DegenerateDemonstratorError& e) {
    throw DegenerateDemonstratorError(prefix(e));
  } catch (const TrainingDivergedError& e) {
    throw TrainingDivergedError(prefix(e));
  } catch (const ConvergenceFailure& e) {
    throw ConvergenceFailure(prefix(e), e.residual());
  } catch (const EmptyDatasetError& e) {
    throw EmptyDatasetError(prefix(e));
  } catch (const ValidationError& e) {
    throw ValidationError(prefix(e));
  } catch (const DomainError& e) {
    throw DomainError(prefix(e));
  } catch (const Error& e) {
    throw Error(prefix(e));
  }
}

}  // namespace

ExperimentConfig default_config(const std::string& env_name) {
  ExperimentConfig config;
  config.environment = env_name;
  // 20 levels, floored at 0.02: deterministic argmax clones stall, so the
  // cleanest level keeps a trace of noise.
  config.schedule = NoiseSchedule::even(20, 5, 1.0, 0.02);
  config.snippets.n_pairs = 2000;
  config.snippets.len_min = 10;
  config.snippets.len_max = 40;
  config.model.kind = RewardKind::linear;
  config.training.step_size = 0.05;
  config.training.max_epochs = 300;
  config.training.batch_size = 32;
  config.solver.method = RlMethod::q_learning;
  config.evaluation.degradation_rollouts = 400;

  if (env_name == "terrain8") {
    config.demonstrator = {DemonstratorMode::softmax_temperature, 0.3, 10, 0};
  } else if (env_name == "lava5") {
    config.demonstrator = {DemonstratorMode::truncated_vi, 5, 10, 0};
    config.snippets.len_min = 8;
    config.snippets.len_max = 30;
  } else if (env_name == "prop1") {
    config.demonstrator = {DemonstratorMode::epsilon_perturbed_optimal, 0.3, 10, 0};
    config.snippets.len_min = 4;
    config.snippets.len_max = 12;
  } else {
    config.demonstrator = {DemonstratorMode::softmax_temperature, 0.3, 10, 0};
  }
  return config;
}

std::string config_to_json(const ExperimentConfig& c) {
  json j;
  j["type"] = "experiment_config";
  j["environment"] = c.environment;
  j["seed"] = c.seed;
  j["workers"] = c.workers;
  j["output_dir"] = c.output_dir;
  j["demonstrator"] = {{"mode", to_string(c.demonstrator.mode)},
                       {"parameter", c.demonstrator.parameter},
                       {"n_demos", c.demonstrator.n_demos}};
  j["cloning"] = {{"model", c.cloning.model == BcModel::tabular ? "tabular" : "softmax-linear"},
                  {"smoothing_alpha", c.cloning.smoothing_alpha},
                  {"step_size", c.cloning.step_size},
                  {"grad_tol", c.cloning.grad_tol},
                  {"max_iters", c.cloning.max_iters}};
  j["noise_schedule"] = {{"levels", c.schedule.levels},
                         {"rollouts_per_level", c.schedule.rollouts_per_level}};
  j["ranking"] = {{"min_gap", c.min_gap},
                  {"n_pairs", c.snippets.n_pairs},
                  {"len_min", c.snippets.len_min},
                  {"len_max", c.snippets.len_max},
                  {"progress", c.snippets.progress},
                  {"equal_length", c.snippets.equal_length}};
  j["reward_model"] = {{"kind", c.model.kind == RewardKind::linear ? "linear" : "mlp"},
                       {"hidden", c.model.hidden},
                       {"leaky_slope", c.model.leaky_slope}};
  j["training"] = {{"step_size", c.training.step_size},
                   {"max_epochs", c.training.max_epochs},
                   {"batch_size", c.training.batch_size},
                   {"patience", c.training.patience},
                   {"validation_fraction", c.training.validation_fraction},
                   {"ensemble", c.training.ensemble}};
  j["solver"] = {{"method", c.solver.method == RlMethod::exact_vi ? "exact-vi" : "q-learning"},
                 {"vi_tol", c.solver.vi_tol},
                 {"vi_max_iters", c.solver.vi_max_iters},
                 {"sigmoid",
                  c.solver.sigmoid_normalize ? json(*c.solver.sigmoid_normalize) : json(nullptr)},
                 {"q_learning",
                  {{"episodes", c.solver.q.episodes},
                   {"episode_length", c.solver.q.episode_length},
                   {"learning_rate", c.solver.q.learning_rate},
                   {"learning_rate_final", c.solver.q.learning_rate_final},
                   {"exploration", c.solver.q.exploration},
                   {"quality_fraction", c.solver.q.quality_fraction}}}};
  j["evaluation"] = {{"rollouts", c.evaluation.rollouts},
                     {"degradation_rollouts", c.evaluation.degradation_rollouts},
                     {"heldout_rollouts", c.evaluation.heldout_rollouts},
                     {"policy_seeds", c.evaluation.policy_seeds}};
  return j.dump(2);
}

ExperimentConfig config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("experiment_config: ") + e.what());
  }
  if (!j.is_object() || j.value("type", "") != "experiment_config")
    throw ValidationError("experiment_config: expected type \"experiment_config\"");

  ExperimentConfig c = default_config(j.value("environment", std::string("terrain8")));
  c.seed = j.value("seed", std::uint64_t{0});
  c.workers = j.value("workers", 1);
  c.output_dir = j.value("output_dir", std::string("out"));
  if (j.contains("demonstrator")) {
    const auto& d = j["demonstrator"];
    if (d.contains("mode"))
      c.demonstrator.mode = demonstrator_mode_from_string(d["mode"].get<std::string>());
    c.demonstrator.parameter = d.value("parameter", c.demonstrator.parameter);
    c.demonstrator.n_demos = d.value("n_demos", c.demonstrator.n_demos);
  }
  if (j.contains("cloning")) {
    const auto& b = j["cloning"];
    if (b.contains("model")) {
      const std::string m = b["model"].get<std::string>();
      if (m == "tabular") c.cloning.model = BcModel::tabular;
      else if (m == "softmax-linear") c.cloning.model = BcModel::softmax_linear;
      else throw ValidationError("experiment_config: unknown cloning model " + m);
    }
    c.cloning.smoothing_alpha = b.value("smoothing_alpha", c.cloning.smoothing_alpha);
    c.cloning.step_size = b.value("step_size", c.cloning.step_size);
    c.cloning.grad_tol = b.value("grad_tol", c.cloning.grad_tol);
    c.cloning.max_iters = b.value("max_iters", c.cloning.max_iters);
  }
  if (j.contains("noise_schedule")) {
    const auto& s = j["noise_schedule"];
    if (s.contains("levels")) c.schedule.levels = s["levels"].get<std::vector<double>>();
    c.schedule.rollouts_per_level =
        s.value("rollouts_per_level", c.schedule.rollouts_per_level);
    c.schedule.validate();
  }
  if (j.contains("ranking")) {
    const auto& r = j["ranking"];
    c.min_gap = r.value("min_gap", c.min_gap);
    c.snippets.n_pairs = r.value("n_pairs", c.snippets.n_pairs);
    c.snippets.len_min = r.value("len_min", c.snippets.len_min);
    c.snippets.len_max = r.value("len_max", c.snippets.len_max);
    c.snippets.progress = r.value("progress", c.snippets.progress);
    c.snippets.equal_length = r.value("equal_length", c.snippets.equal_length);
  }
  if (j.contains("reward_model")) {
    const auto& m = j["reward_model"];
    if (m.contains("kind")) {
      const std::string k = m["kind"].get<std::string>();
      if (k == "linear") c.model.kind = RewardKind::linear;
      else if (k == "mlp") c.model.kind = RewardKind::mlp;
      else throw ValidationError("experiment_config: unknown reward model kind " + k);
    }
    c.model.hidden = m.value("hidden", c.model.hidden);
    c.model.leaky_slope = m.value("leaky_slope", c.model.leaky_slope);
  }
  if (j.contains("training")) {
    const auto& t = j["training"];
    c.training.step_size = t.value("step_size", c.training.step_size);
    c.training.max_epochs = t.value("max_epochs", c.training.max_epochs);
    c.training.batch_size = t.value("batch_size", c.training.batch_size);
    c.training.patience = t.value("patience", c.training.patience);
    c.training.validation_fraction =
        t.value("validation_fraction", c.training.validation_fraction);
    c.training.ensemble = t.value("ensemble", c.training.ensemble);
  }
  if (j.contains("solver")) {
    const auto& s = j["solver"];
    if (s.contains("method")) {
      const std::string m = s["method"].get<std::string>();
      if (m == "exact-vi") c.solver.method = RlMethod::exact_vi;
      else if (m == "q-learning") c.solver.method = RlMethod::q_learning;
      else throw ValidationError("experiment_config: unknown solver method " + m);
    }
    c.solver.vi_tol = s.value("vi_tol", c.solver.vi_tol);
    c.solver.vi_max_iters = s.value("vi_max_iters", c.solver.vi_max_iters);
    if (s.contains("sigmoid") && !s["sigmoid"].is_null())
      c.solver.sigmoid_normalize = s["sigmoid"].get<bool>();
    if (s.contains("q_learning")) {
      const auto& q = s["q_learning"];
      c.solver.q.episodes = q.value("episodes", c.solver.q.episodes);
      c.solver.q.episode_length = q.value("episode_length", c.solver.q.episode_length);
      c.solver.q.learning_rate = q.value("learning_rate", c.solver.q.learning_rate);
      c.solver.q.learning_rate_final =
          q.value("learning_rate_final", c.solver.q.learning_rate_final);
      c.solver.q.exploration = q.value("exploration", c.solver.q.exploration);
      c.solver.q.quality_fraction =
          q.value("quality_fraction", c.solver.q.quality_fraction);
    }
  }
  if (j.contains("evaluation")) {
    const auto& e = j["evaluation"];
    c.evaluation.rollouts = e.value("rollouts", c.evaluation.rollouts);
    c.evaluation.degradation_rollouts =
        e.value("degradation_rollouts", c.evaluation.degradation_rollouts);
    c.evaluation.heldout_rollouts =
        e.value("heldout_rollouts", c.evaluation.heldout_rollouts);
    if (e.contains("policy_seeds"))
      c.evaluation.policy_seeds = e["policy_seeds"].get<std::vector<int>>();
  }
  if (c.evaluation.policy_seeds.empty())
    throw ValidationError("experiment_config: policy_seeds must be non-empty");
  return c;
}

Mdp resolve_environment(const std::string& environment) {
  if (is_builtin_environment(environment)) return make_builtin_environment(environment);
  return mdp_from_json(read_text_file(environment));
}

const MethodStats& EvaluationSummary::selected(const std::string& method) const {
  const MethodStats* single = nullptr;
  for (const MethodStats& row : rows) {
    if (row.method != method) continue;
    if (row.seed_label == "best") return row;
    single = &row;
  }
  if (!single) throw ValidationError("summary has no rows for method " + method);
  return *single;
}

MethodStats evaluate_policy(const Mdp& mdp, const Policy& policy,
                            const std::string& method, const std::string& seed_label,
                            int rollouts, std::uint64_t seed) {
  const int length = mdp.horizon().value_or(50);
  std::vector<double> returns(rollouts);
  for (int i = 0; i < rollouts; ++i) {
    Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(i)}));
    const Trajectory traj = sample_trajectory(mdp, policy, length, rng);
    returns[i] = trajectory_return(traj, mdp.true_rewards(), mdp.discount());
  }
  MethodStats stats;
  stats.method = method;
  stats.seed_label = seed_label;
  stats.mean_return = mean(returns);
  stats.std_return = sample_std(returns);
  stats.best_return = *std::max_element(returns.begin(), returns.end());
  stats.worst_return = *std::min_element(returns.begin(), returns.end());
  return stats;
}

namespace {

// Method ids for evaluation seed streams.
enum : std::uint64_t { kEvalDrex = 1, kEvalBc = 2, kEvalLiveLong = 3, kEvalRandom = 4, kEvalOptimal = 5 };

std::vector<MethodStats> optimize_and_evaluate(const Mdp& mdp,
                                               const Eigen::VectorXd& reward_vector,
                                               const std::string& method,
                                               std::uint64_t method_id,
                                               const ExperimentConfig& config,
                                               std::vector<OptimizeResult>* keep_policies,
                                               int* best_index) {
  std::vector<MethodStats> rows;
  int best = 0;
  for (std::size_t k = 0; k < config.evaluation.policy_seeds.size(); ++k) {
    const int policy_seed = config.evaluation.policy_seeds[k];
    OptimizeResult opt = optimize_on_reward_vector(
        mdp, reward_vector, config.solver,
        derive_seed(config.seed, {stage_seed::policy, method_id,
                                  static_cast<std::uint64_t>(policy_seed)}));
    MethodStats stats = evaluate_policy(
        mdp, opt.policy, method, std::to_string(policy_seed), config.evaluation.rollouts,
        derive_seed(config.seed, {stage_seed::evaluation, method_id,
                                  static_cast<std::uint64_t>(policy_seed)}));
    if (keep_policies) keep_policies->push_back(std::move(opt));
    rows.push_back(std::move(stats));
    if (rows[k].mean_return > rows[best].mean_return) best = static_cast<int>(k);
  }
  // Best-of-seeds row, mirroring the paper's reporting; the per-seed rows
  // stay alongside it.
  MethodStats best_row = rows[best];
  best_row.seed_label = "best";
  rows.push_back(std::move(best_row));
  if (best_index) *best_index = best;
  return rows;
}

void apply_demo_flags(EvaluationSummary& summary) {
  for (MethodStats& row : summary.rows) {
    row.beats_demo_avg = row.mean_return > summary.demo_avg;
    row.beats_demo_best = row.mean_return > summary.demo_best;
  }
}

}  // namespace

std::vector<MethodStats> run_baseline_bc(const ExperimentConfig& config) {
  const Mdp mdp = resolve_environment(config.environment);
  DemonstratorSpec spec = config.demonstrator;
  spec.seed = derive_seed(config.seed, {stage_seed::demos});
  const std::vector<Trajectory> demos = generate_demonstrations(mdp, spec);
  const ClonedPolicy cloned = behavioral_cloning(mdp, demos, config.cloning);
  return {evaluate_policy(mdp, cloned.policy, "bc", "-", config.evaluation.rollouts,
                          derive_seed(config.seed, {stage_seed::evaluation, kEvalBc}))};
}

std::vector<MethodStats> run_baseline_livelong(const ExperimentConfig& config) {
  const Mdp mdp = resolve_environment(config.environment);
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(mdp.n_states());
  return optimize_and_evaluate(mdp, ones, "live-long", kEvalLiveLong, config, nullptr,
                               nullptr);
}

DrexRun run_drex(const ExperimentConfig& config) {
  const Mdp mdp = stage("environment", [&] { return resolve_environment(config.environment); });
  DrexRun run;

  // Line 1: demonstrations from the suboptimal demonstrator.
  DemonstratorSpec demo_spec = config.demonstrator;
  demo_spec.seed = derive_seed(config.seed, {stage_seed::demos});
  run.demos = stage("demo-gen", [&] { return generate_demonstrations(mdp, demo_spec); });

  // Line 1 (continued): behavioral cloning.
  run.cloned = stage("clone", [&] { return behavioral_cloning(mdp, run.demos, config.cloning); });

  // Lines 2-4: noisy rollouts per level, plus the degradation curve.
  run.rollouts = stage("degrade", [&] {
    return noisy_rollouts(run.cloned.policy, mdp, config.schedule,
                          derive_seed(config.seed, {stage_seed::rollouts}), config.workers);
  });
  run.degradation = stage("degrade", [&] {
    return degradation_curve(run.cloned.policy, mdp, config.schedule,
                             config.evaluation.degradation_rollouts,
                             derive_seed(config.seed, {stage_seed::degradation}),
                             config.workers);
  });

  // Line 5: automatic rankings.
  run.ranked = stage("rank", [&] { return build_ranked_dataset(run.rollouts, config.min_gap); });
  run.pairs = stage("rank", [&] {
    return sample_snippet_pairs(run.ranked, config.snippets,
                                derive_seed(config.seed, {stage_seed::pairs}));
  });

  // Line 6: reward inference.
  run.reward = stage("train-reward", [&] {
    return train_reward_ensemble(mdp, run.pairs, config.model, config.training,
                                 derive_seed(config.seed, {stage_seed::training}));
  });

  // Line 7: policy optimization on the learned reward, then evaluation.
  EvaluationSummary summary;
  {
    std::vector<double> demo_returns;
    for (const Trajectory& traj : run.demos)
      demo_returns.push_back(trajectory_return(traj, mdp.true_rewards(), mdp.discount()));
    summary.demo_avg = mean(demo_returns);
    summary.demo_best = *std::max_element(demo_returns.begin(), demo_returns.end());
    MethodStats demo_stats;
    demo_stats.method = "demonstrations";
    demo_stats.seed_label = "-";
    demo_stats.mean_return = summary.demo_avg;
    demo_stats.std_return = sample_std(demo_returns);
    demo_stats.best_return = summary.demo_best;
    demo_stats.worst_return = *std::min_element(demo_returns.begin(), demo_returns.end());
    summary.rows.push_back(std::move(demo_stats));
  }

  const Eigen::VectorXd learned_rewards = run.reward.state_rewards(mdp);
  std::vector<MethodStats> drex_rows = stage("optimize", [&] {
    return optimize_and_evaluate(mdp, learned_rewards, "drex", kEvalDrex, config,
                                 &run.policies, &run.best_policy);
  });
  for (MethodStats& row : drex_rows) summary.rows.push_back(std::move(row));

  stage("evaluate", [&] {
    summary.rows.push_back(evaluate_policy(
        mdp, run.cloned.policy, "bc", "-", config.evaluation.rollouts,
        derive_seed(config.seed, {stage_seed::evaluation, kEvalBc})));
    for (MethodStats& row : run_baseline_livelong(config)) summary.rows.push_back(std::move(row));
    summary.rows.push_back(evaluate_policy(
        mdp, Policy::uniform(mdp.n_states(), mdp.n_actions()), "random", "-",
        config.evaluation.rollouts,
        derive_seed(config.seed, {stage_seed::evaluation, kEvalRandom})));
    const ValueIterationResult vi = value_iteration(mdp, mdp.true_rewards());
    summary.rows.push_back(evaluate_policy(
        mdp, vi.policy, "optimal", "-", config.evaluation.rollouts,
        derive_seed(config.seed, {stage_seed::evaluation, kEvalOptimal})));
    return 0;
  });
  apply_demo_flags(summary);
  run.summary = std::move(summary);

  // Figure-3 analogue: demos + synthetic rollouts + held-out trajectories
  // from policies better than the demonstrator.
  stage("evaluate", [&] {
    std::vector<Trajectory> synthetic;
    for (const RolloutGroup& g : run.rollouts)
      synthetic.insert(synthetic.end(), g.trajectories.begin(), g.trajectories.end());
    std::vector<Trajectory> heldout;
    const ValueIterationResult vi = value_iteration(mdp, mdp.true_rewards());
    const int length = mdp.horizon().value_or(50);
    int stream = 0;
    for (double eps : {0.0, 0.1, 0.2}) {
      const Policy wrapped = epsilon_greedy_wrap(vi.policy, eps);
      for (int i = 0; i < config.evaluation.heldout_rollouts; ++i) {
        Rng rng(derive_seed(config.seed, {stage_seed::heldout,
                                          static_cast<std::uint64_t>(stream++)}));
        heldout.push_back(sample_trajectory(mdp, wrapped, length, rng));
      }
    }
    run.extrapolation = extrapolation_report(
        run.reward, mdp,
        {{"demos", run.demos}, {"synthetic", synthetic}, {"heldout", heldout}});
    return 0;
  });

  return run;
}

void emit_report(const DrexRun& run, const std::filesystem::path& output_dir) {
  if (run.summary.rows.empty())
    throw EmptyDatasetError("emit_report: no summary rows to write");
  std::filesystem::create_directories(output_dir);

  CsvWriter summary({"method", "seed_policy", "mean_return", "std_return", "best_return",
                     "worst_return", "beats_demo_avg", "beats_demo_best"});
  for (const MethodStats& row : run.summary.rows)
    summary.add_row({row.method, row.seed_label, csv_double(row.mean_return),
                     csv_double(row.std_return), csv_double(row.best_return),
                     csv_double(row.worst_return), row.beats_demo_avg ? "1" : "0",
                     row.beats_demo_best ? "1" : "0"});
  summary.write(output_dir / "summary.csv");

  CsvWriter degradation({"epsilon", "mean_return", "std_return", "n_rollouts"});
  for (const DegradationRow& row : run.degradation)
    degradation.add_row({csv_double(row.epsilon), csv_double(row.mean_return),
                         csv_double(row.std_return), std::to_string(row.n_rollouts)});
  degradation.write(output_dir / "degradation.csv");

  // One file per ensemble member; members after the first get a suffix.
  for (std::size_t m = 0; m < run.reward.reports.size(); ++m) {
    CsvWriter curve({"epoch", "train_loss", "val_loss"});
    const TrainReport& report = run.reward.reports[m];
    for (std::size_t e = 0; e < report.train_loss.size(); ++e)
      curve.add_row({std::to_string(e), csv_double(report.train_loss[e]),
                     csv_double(report.validation_loss[e])});
    const std::string name =
        m == 0 ? "training_curve.csv" : "training_curve_member" + std::to_string(m) + ".csv";
    curve.write(output_dir / name);
  }

  CsvWriter extrapolation({"set", "ground_truth_return", "predicted_return",
                           "predicted_normalized"});
  for (const ExtrapolationRow& row : run.extrapolation.rows)
    extrapolation.add_row({row.set_name, csv_double(row.ground_truth),
                           csv_double(row.predicted_raw),
                           csv_double(row.predicted_normalized)});
  extrapolation.write(output_dir / "extrapolation.csv");

  CsvWriter corr({"set", "n", "pearson", "spearman"});
  auto corr_cell = [](const std::optional<double>& v) {
    return v ? csv_double(*v) : std::string("undefined");
  };
  for (const auto& [name, stats] : run.extrapolation.per_set)
    corr.add_row({name, std::to_string(stats.n), corr_cell(stats.pearson),
                  corr_cell(stats.spearman)});
  corr.add_row({"pooled", std::to_string(run.extrapolation.pooled.n),
                corr_cell(run.extrapolation.pooled.pearson),
                corr_cell(run.extrapolation.pooled.spearman)});
  corr.write(output_dir / "extrapolation_summary.csv");
}

}  // namespace drex
