#include "drex/reward.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "drex/stats.hpp"

namespace drex {

RewardModel RewardModel::linear(int dim) {
  RewardModel m;
  m.kind_ = RewardKind::linear;
  m.dim_ = dim;
  m.w_ = Eigen::VectorXd::Zero(dim);
  return m;
}

RewardModel RewardModel::linear(Eigen::VectorXd weights) {
  RewardModel m;
  m.kind_ = RewardKind::linear;
  m.dim_ = static_cast<int>(weights.size());
  m.w_ = std::move(weights);
  return m;
}

RewardModel RewardModel::mlp(int dim, int hidden, Rng& init_rng, double leaky_slope) {
  if (hidden < 1) throw DomainError("RewardModel::mlp: hidden must be >= 1");
  RewardModel m;
  m.kind_ = RewardKind::mlp;
  m.dim_ = dim;
  m.leaky_slope_ = leaky_slope;
  m.w1_.resize(hidden, dim);
  const double s1 = std::sqrt(2.0 / dim);
  for (int i = 0; i < hidden; ++i)
    for (int j = 0; j < dim; ++j) m.w1_(i, j) = s1 * init_rng.normal();
  m.b1_ = Eigen::VectorXd::Zero(hidden);
  m.w2_.resize(hidden);
  const double s2 = std::sqrt(1.0 / hidden);
  for (int i = 0; i < hidden; ++i) m.w2_[i] = s2 * init_rng.normal();
  m.b2_ = 0.0;
  return m;
}

double RewardModel::reward(const Eigen::VectorXd& phi) const {
  if (phi.size() != dim_)
    throw ValidationError("RewardModel::reward: feature dimension mismatch");
  if (kind_ == RewardKind::linear) return w_.dot(phi);
  const Eigen::VectorXd z = w1_ * phi + b1_;
  const Eigen::VectorXd h =
      z.unaryExpr([this](double x) { return x > 0.0 ? x : leaky_slope_ * x; });
  return w2_.dot(h) + b2_;
}

Eigen::VectorXd RewardModel::state_rewards(const Mdp& mdp) const {
  Eigen::VectorXd r(mdp.n_states());
  for (int s = 0; s < mdp.n_states(); ++s)
    r[s] = reward(mdp.features().row(s).transpose());
  return r;
}

const Eigen::VectorXd& RewardModel::weights() const {
  if (kind_ != RewardKind::linear)
    throw TheoremInapplicableError("weights(): model is not linear");
  return w_;
}

int RewardModel::param_count() const {
  if (kind_ == RewardKind::linear) return dim_;
  return static_cast<int>(w1_.size() + b1_.size() + w2_.size()) + 1;
}

Eigen::VectorXd RewardModel::get_params() const {
  if (kind_ == RewardKind::linear) return w_;
  Eigen::VectorXd p(param_count());
  int at = 0;
  for (int i = 0; i < w1_.rows(); ++i)
    for (int j = 0; j < w1_.cols(); ++j) p[at++] = w1_(i, j);
  for (int i = 0; i < b1_.size(); ++i) p[at++] = b1_[i];
  for (int i = 0; i < w2_.size(); ++i) p[at++] = w2_[i];
  p[at] = b2_;
  return p;
}

void RewardModel::set_params(const Eigen::VectorXd& params) {
  if (params.size() != param_count())
    throw ValidationError("RewardModel::set_params: parameter count mismatch");
  if (kind_ == RewardKind::linear) {
    w_ = params;
    return;
  }
  int at = 0;
  for (int i = 0; i < w1_.rows(); ++i)
    for (int j = 0; j < w1_.cols(); ++j) w1_(i, j) = params[at++];
  for (int i = 0; i < b1_.size(); ++i) b1_[i] = params[at++];
  for (int i = 0; i < w2_.size(); ++i) w2_[i] = params[at++];
  b2_ = params[at];
}

Eigen::VectorXd RewardModel::reward_param_gradient(const Eigen::VectorXd& phi) const {
  if (kind_ == RewardKind::linear) return phi;
  const int hidden = static_cast<int>(b1_.size());
  const Eigen::VectorXd z = w1_ * phi + b1_;
  Eigen::VectorXd grad(param_count());
  int at = 0;
  for (int i = 0; i < hidden; ++i) {
    const double dz = z[i] > 0.0 ? 1.0 : leaky_slope_;
    for (int j = 0; j < dim_; ++j) grad[at++] = w2_[i] * dz * phi[j];
  }
  for (int i = 0; i < hidden; ++i) grad[at++] = w2_[i] * (z[i] > 0.0 ? 1.0 : leaky_slope_);
  for (int i = 0; i < hidden; ++i) grad[at++] = z[i] > 0.0 ? z[i] : leaky_slope_ * z[i];
  grad[at] = 1.0;
  return grad;
}

double snippet_score(const RewardModel& model, const Mdp& mdp,
                     std::span<const int> states) {
  double score = 0.0;
  for (int s : states) {
    if (s < 0 || s >= mdp.n_states())
      throw ValidationError("snippet_score: state index out of range");
    score += model.reward(mdp.features().row(s).transpose());
  }
  return score;
}

double pairwise_loss_from_scores(double score_worse, double score_better) {
  // softplus(score_worse - score_better), overflow-free in both directions.
  const double x = score_worse - score_better;
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

double pairwise_loss(const RewardModel& model, const Mdp& mdp, const SnippetPair& pair) {
  return pairwise_loss_from_scores(snippet_score(model, mdp, pair.worse.states),
                                   snippet_score(model, mdp, pair.better.states));
}

double mean_pairwise_loss(const RewardModel& model, const Mdp& mdp,
                          std::span<const SnippetPair> pairs) {
  if (pairs.empty()) throw EmptyDatasetError("mean_pairwise_loss: empty batch");
  const Eigen::VectorXd r = model.state_rewards(mdp);
  double total = 0.0;
  for (const SnippetPair& pair : pairs) {
    double sw = 0.0, sb = 0.0;
    for (int s : pair.worse.states) sw += r[s];
    for (int s : pair.better.states) sb += r[s];
    total += pairwise_loss_from_scores(sw, sb);
  }
  return total / static_cast<double>(pairs.size());
}

Eigen::VectorXd loss_gradient(const RewardModel& model, const Mdp& mdp,
                              std::span<const SnippetPair> pairs) {
  if (pairs.empty()) throw EmptyDatasetError("loss_gradient: empty batch");
  const Eigen::VectorXd r = model.state_rewards(mdp);
  // d loss / d R(s) accumulated per state, then one backward pass per state.
  Eigen::VectorXd coeff = Eigen::VectorXd::Zero(mdp.n_states());
  const double inv_n = 1.0 / static_cast<double>(pairs.size());
  for (const SnippetPair& pair : pairs) {
    double sw = 0.0, sb = 0.0;
    for (int s : pair.worse.states) sw += r[s];
    for (int s : pair.better.states) sb += r[s];
    const double x = sw - sb;
    const double sig = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                                : std::exp(x) / (1.0 + std::exp(x));
    for (int s : pair.worse.states) coeff[s] += sig * inv_n;
    for (int s : pair.better.states) coeff[s] -= sig * inv_n;
  }
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(model.param_count());
  for (int s = 0; s < mdp.n_states(); ++s) {
    if (coeff[s] == 0.0) continue;
    grad += coeff[s] * model.reward_param_gradient(mdp.features().row(s).transpose());
  }
  return grad;
}

namespace {

RewardModel make_model(const ModelSpec& spec, int dim, Rng& rng) {
  if (spec.kind == RewardKind::linear) return RewardModel::linear(dim);
  return RewardModel::mlp(dim, spec.hidden, rng, spec.leaky_slope);
}

double ranking_accuracy(const RewardModel& model, const Mdp& mdp,
                        std::span<const SnippetPair> pairs) {
  if (pairs.empty()) return 0.0;
  const Eigen::VectorXd r = model.state_rewards(mdp);
  double correct = 0.0;
  for (const SnippetPair& pair : pairs) {
    double sw = 0.0, sb = 0.0;
    for (int s : pair.worse.states) sw += r[s];
    for (int s : pair.better.states) sb += r[s];
    if (sb > sw) correct += 1.0;
    else if (sb == sw) correct += 0.5;
  }
  return correct / static_cast<double>(pairs.size());
}

}  // namespace

std::pair<RewardModel, TrainReport> train_reward(const Mdp& mdp,
                                                 std::span<const SnippetPair> pairs,
                                                 const ModelSpec& spec,
                                                 const TrainConfig& config,
                                                 std::uint64_t seed) {
  const int n = static_cast<int>(pairs.size());
  if (n < 1) throw EmptyDatasetError("train_reward: no training pairs");
  int n_val = static_cast<int>(std::lround(config.validation_fraction * n));
  n_val = std::clamp(n_val, n >= 2 ? 1 : 0, n - 1);
  if (n_val < 1)
    throw ValidationError("train_reward: empty validation set (need >= 2 pairs)");

  Rng rng(derive_seed(seed, {0x7261696eULL}));
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (int i = n - 1; i > 0; --i) std::swap(order[i], order[rng.uniform_int(i + 1)]);
  std::vector<SnippetPair> train_set, val_set;
  for (int i = 0; i < n - n_val; ++i) train_set.push_back(pairs[order[i]]);
  for (int i = n - n_val; i < n; ++i) val_set.push_back(pairs[order[i]]);

  RewardModel model = make_model(spec, mdp.feature_dim(), rng);
  TrainReport report;
  Eigen::VectorXd best_params = model.get_params();
  report.best_validation_loss = std::numeric_limits<double>::infinity();
  int checks_without_improvement = 0;

  const int batch = std::max(1, std::min<int>(config.batch_size,
                                              static_cast<int>(train_set.size())));
  std::vector<SnippetPair> batch_buf;
  for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
    for (int i = static_cast<int>(train_set.size()) - 1; i > 0; --i)
      std::swap(train_set[i], train_set[rng.uniform_int(i + 1)]);
    for (std::size_t at = 0; at < train_set.size(); at += batch) {
      const std::size_t end = std::min(train_set.size(), at + batch);
      batch_buf.assign(train_set.begin() + at, train_set.begin() + end);
      const Eigen::VectorXd grad = loss_gradient(model, mdp, batch_buf);
      model.set_params(model.get_params() - config.step_size * grad);
    }

    const double train_loss = mean_pairwise_loss(model, mdp, train_set);
    const double val_loss = mean_pairwise_loss(model, mdp, val_set);
    report.train_loss.push_back(train_loss);
    report.validation_loss.push_back(val_loss);
    if (!std::isfinite(train_loss) || !std::isfinite(val_loss))
      throw TrainingDivergedError("train_reward: non-finite loss at epoch " +
                                  std::to_string(epoch));

    if (val_loss < report.best_validation_loss) {
      report.best_validation_loss = val_loss;
      report.stopping_epoch = epoch;
      best_params = model.get_params();
      checks_without_improvement = 0;
    } else if (++checks_without_improvement >= config.patience) {
      report.early_stopped = true;
      break;
    }
  }

  model.set_params(best_params);
  report.validation_accuracy = ranking_accuracy(model, mdp, val_set);
  return {std::move(model), std::move(report)};
}

double RewardFunction::reward(const Eigen::VectorXd& phi) const {
  if (members.empty()) throw EmptyDatasetError("RewardFunction: no members");
  double sum = 0.0;
  for (const RewardModel& m : members) sum += m.reward(phi);
  return sum / static_cast<double>(members.size());
}

Eigen::VectorXd RewardFunction::state_rewards(const Mdp& mdp) const {
  if (members.empty()) throw EmptyDatasetError("RewardFunction: no members");
  Eigen::VectorXd r = Eigen::VectorXd::Zero(mdp.n_states());
  for (const RewardModel& m : members) r += m.state_rewards(mdp);
  return r / static_cast<double>(members.size());
}

RewardFunction train_reward_ensemble(const Mdp& mdp, std::span<const SnippetPair> pairs,
                                     const ModelSpec& spec, const TrainConfig& config,
                                     std::uint64_t seed) {
  RewardFunction fn;
  const int k = std::max(1, config.ensemble);
  for (int member = 0; member < k; ++member) {
    auto [model, report] = train_reward(
        mdp, pairs, spec, config,
        derive_seed(seed, {0x656e73ULL, static_cast<std::uint64_t>(member)}));
    fn.members.push_back(std::move(model));
    fn.reports.push_back(std::move(report));
  }
  return fn;
}

double predicted_return(const RewardModel& model, const Mdp& mdp,
                        const Trajectory& traj, ReturnMode mode, double gamma) {
  mdp.check_trajectory(traj);
  double value = 0.0;
  double g = 1.0;
  for (const Step& st : traj.steps) {
    value += g * model.reward(mdp.features().row(st.state).transpose());
    if (mode == ReturnMode::discounted) g *= gamma;
  }
  return value;
}

double predicted_return(const RewardFunction& fn, const Mdp& mdp,
                        const Trajectory& traj, ReturnMode mode, double gamma) {
  if (fn.members.empty()) throw EmptyDatasetError("predicted_return: no members");
  double sum = 0.0;
  for (const RewardModel& m : fn.members)
    sum += predicted_return(m, mdp, traj, mode, gamma);
  return sum / static_cast<double>(fn.members.size());
}

ExtrapolationReport extrapolation_report(
    const RewardFunction& fn, const Mdp& mdp,
    const std::vector<std::pair<std::string, std::span<const Trajectory>>>& sets) {
  ExtrapolationReport report;
  for (const auto& [name, trajectories] : sets) {
    if (trajectories.empty())
      throw EmptyDatasetError("extrapolation_report: set '" + name + "' is empty");
    for (const Trajectory& traj : trajectories) {
      ExtrapolationRow row;
      row.set_name = name;
      // Undiscounted on both axes, matching the ranking loss's framing.
      row.ground_truth = trajectory_return(traj, mdp.true_rewards(), 1.0);
      row.predicted_raw = predicted_return(fn, mdp, traj, ReturnMode::sum);
      report.rows.push_back(row);
    }
  }

  double gt_lo = report.rows.front().ground_truth, gt_hi = gt_lo;
  double pred_lo = report.rows.front().predicted_raw, pred_hi = pred_lo;
  for (const ExtrapolationRow& row : report.rows) {
    gt_lo = std::min(gt_lo, row.ground_truth);
    gt_hi = std::max(gt_hi, row.ground_truth);
    pred_lo = std::min(pred_lo, row.predicted_raw);
    pred_hi = std::max(pred_hi, row.predicted_raw);
  }
  const double pred_span = pred_hi - pred_lo;
  for (ExtrapolationRow& row : report.rows) {
    row.predicted_normalized =
        pred_span > 0.0
            ? gt_lo + (row.predicted_raw - pred_lo) / pred_span * (gt_hi - gt_lo)
            : gt_lo;
  }

  auto correlate = [](std::span<const double> gt, std::span<const double> pred) {
    CorrelationStats stats;
    stats.n = static_cast<int>(gt.size());
    stats.pearson = pearson(gt, pred);
    stats.spearman = spearman(gt, pred);
    return stats;
  };

  std::vector<double> pooled_gt, pooled_pred;
  for (const auto& [name, trajectories] : sets) {
    std::vector<double> gt, pred;
    for (const ExtrapolationRow& row : report.rows) {
      if (row.set_name != name) continue;
      gt.push_back(row.ground_truth);
      pred.push_back(row.predicted_raw);
      pooled_gt.push_back(row.ground_truth);
      pooled_pred.push_back(row.predicted_raw);
    }
    report.per_set[name] = correlate(gt, pred);
  }
  report.pooled = correlate(pooled_gt, pooled_pred);
  return report;
}

}  // namespace drex
