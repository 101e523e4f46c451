#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "drex/cloning.hpp"
#include "drex/mdp.hpp"
#include "drex/policy.hpp"
#include "drex/ranking.hpp"
#include "drex/reward.hpp"

namespace drex {

// JSON document schemas. Every loader validates the full invariant set of the
// type it produces and rejects with diagnostics naming the offending element
// (and the line/column for parse errors).

std::string mdp_to_json(const Mdp& mdp);
Mdp mdp_from_json(const std::string& text);

std::string policy_to_json(const Policy& policy);
Policy policy_from_json(const std::string& text);

std::string trajectories_to_json(std::span<const Trajectory> trajectories);
std::vector<Trajectory> trajectories_from_json(const std::string& text);

std::string rollout_groups_to_json(std::span<const RolloutGroup> groups);
std::vector<RolloutGroup> rollout_groups_from_json(const std::string& text);

std::string ranked_dataset_to_json(const RankedDataset& dataset);
RankedDataset ranked_dataset_from_json(const std::string& text);

std::string reward_function_to_json(const RewardFunction& fn);
RewardFunction reward_function_from_json(const std::string& text);

std::string training_report_to_json(const TrainReport& report);

void write_text_file(const std::filesystem::path& path, const std::string& contents);
std::string read_text_file(const std::filesystem::path& path);

// Deterministic numeric formatting shared by every CSV artifact.
std::string csv_double(double x);

class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header) : header_(std::move(header)) {}

  void add_row(std::vector<std::string> cells);
  std::string str() const;
  void write(const std::filesystem::path& path) const;

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

}  // namespace drex
