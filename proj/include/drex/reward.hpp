#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "drex/mdp.hpp"
#include "drex/ranking.hpp"
#include "drex/rng.hpp"

namespace drex {

enum class RewardKind { linear, mlp };

// State-reward approximator R(s) = f_theta(phi(s)). Linear, or a one-hidden-
// layer perceptron with leaky-rectifier activations.
class RewardModel {
 public:
  static RewardModel linear(int dim);
  static RewardModel linear(Eigen::VectorXd weights);
  static RewardModel mlp(int dim, int hidden, Rng& init_rng, double leaky_slope = 0.01);

  RewardKind kind() const { return kind_; }
  int input_dim() const { return dim_; }
  int hidden_units() const { return static_cast<int>(b1_.size()); }
  double leaky_slope() const { return leaky_slope_; }

  double reward(const Eigen::VectorXd& phi) const;
  // R(s) for every state of the MDP.
  Eigen::VectorXd state_rewards(const Mdp& mdp) const;

  // Linear weights; only valid for kind linear.
  const Eigen::VectorXd& weights() const;

  // Flattened parameter access (order: linear w | mlp W1 row-major, b1, w2, b2).
  int param_count() const;
  Eigen::VectorXd get_params() const;
  void set_params(const Eigen::VectorXd& params);

  // d reward / d params at a single input.
  Eigen::VectorXd reward_param_gradient(const Eigen::VectorXd& phi) const;

 private:
  RewardKind kind_ = RewardKind::linear;
  int dim_ = 0;
  Eigen::VectorXd w_;                     // linear
  Eigen::MatrixXd w1_;                    // mlp: hidden x dim
  Eigen::VectorXd b1_, w2_;               // mlp: hidden
  double b2_ = 0.0;
  double leaky_slope_ = 0.01;

  friend struct RewardModelIo;
};

// Undiscounted snippet score S = sum_{s in snippet} R(s), as in the ranking
// loss.
double snippet_score(const RewardModel& model, const Mdp& mdp,
                     std::span<const int> states);

// Ranking loss for scores (s_worse, s_better):
//   -log( exp(s_better) / (exp(s_worse) + exp(s_better)) )
// computed in the overflow-free softplus form.
double pairwise_loss_from_scores(double score_worse, double score_better);
double pairwise_loss(const RewardModel& model, const Mdp& mdp, const SnippetPair& pair);
double mean_pairwise_loss(const RewardModel& model, const Mdp& mdp,
                          std::span<const SnippetPair> pairs);

// Mean analytic gradient of the ranking loss over a batch, flattened to match
// get_params().
Eigen::VectorXd loss_gradient(const RewardModel& model, const Mdp& mdp,
                              std::span<const SnippetPair> pairs);

struct ModelSpec {
  RewardKind kind = RewardKind::linear;
  int hidden = 32;
  double leaky_slope = 0.01;
};

struct TrainConfig {
  double step_size = 0.05;
  int max_epochs = 400;
  int batch_size = 32;
  // Early stopping: give up after this many consecutive validation checks
  // without improvement; one check per epoch.
  int patience = 6;
  double validation_fraction = 0.2;
  int ensemble = 1;
};

struct TrainReport {
  std::vector<double> train_loss;        // per epoch
  std::vector<double> validation_loss;   // per epoch
  int stopping_epoch = 0;                // epoch of the best validation loss
  double best_validation_loss = 0.0;
  double validation_accuracy = 0.0;      // pairwise ranking accuracy at the end
  bool early_stopped = false;
};

// SGD on the ranking loss with an 80/20 train/validation split and early
// stopping; returns the best-validation parameters. Divergence (non-finite
// loss) raises TrainingDivergedError.
std::pair<RewardModel, TrainReport> train_reward(const Mdp& mdp,
                                                 std::span<const SnippetPair> pairs,
                                                 const ModelSpec& spec,
                                                 const TrainConfig& config,
                                                 std::uint64_t seed);

// Mean of k independently seeded models (k = config.ensemble).
struct RewardFunction {
  std::vector<RewardModel> members;
  std::vector<TrainReport> reports;

  double reward(const Eigen::VectorXd& phi) const;
  Eigen::VectorXd state_rewards(const Mdp& mdp) const;
};

RewardFunction train_reward_ensemble(const Mdp& mdp,
                                     std::span<const SnippetPair> pairs,
                                     const ModelSpec& spec, const TrainConfig& config,
                                     std::uint64_t seed);

enum class ReturnMode { sum, discounted };

double predicted_return(const RewardModel& model, const Mdp& mdp,
                        const Trajectory& traj, ReturnMode mode,
                        double gamma = 1.0);
double predicted_return(const RewardFunction& fn, const Mdp& mdp,
                        const Trajectory& traj, ReturnMode mode,
                        double gamma = 1.0);

struct ExtrapolationRow {
  std::string set_name;
  double ground_truth = 0.0;
  double predicted_raw = 0.0;
  double predicted_normalized = 0.0;
};

struct CorrelationStats {
  std::optional<double> pearson;   // nullopt when undefined (constant inputs)
  std::optional<double> spearman;
  int n = 0;
};

struct ExtrapolationReport {
  std::vector<ExtrapolationRow> rows;
  std::map<std::string, CorrelationStats> per_set;
  CorrelationStats pooled;
};

// Ground-truth vs predicted returns over named trajectory sets (demos,
// synthetic rollouts, held-out better-than-demo trajectories). Predicted
// returns are undiscounted sums min-max rescaled to the pooled ground-truth
// range.
ExtrapolationReport extrapolation_report(
    const RewardFunction& fn, const Mdp& mdp,
    const std::vector<std::pair<std::string, std::span<const Trajectory>>>& sets);

}  // namespace drex
