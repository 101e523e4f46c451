#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "drex/mdp.hpp"

namespace drex {

// Rollouts that share one noise level.
struct RolloutGroup {
  double epsilon = 0.0;
  std::vector<Trajectory> trajectories;
};

// Automatically ranked dataset: trajectories grouped by the noise level that
// generated them, plus the induced preference pairs. pairs[k] = (i, j) means
// trajectory i is dispreferred to trajectory j (i came from strictly more
// noise). Indices refer to the flattened group order.
struct RankedDataset {
  std::vector<RolloutGroup> groups;
  std::vector<std::pair<int, int>> pairs;
  double min_gap = 0.0;

  int total_trajectories() const;
  const Trajectory& trajectory(int index) const;
  double noise_of(int index) const;
};

// Builds all cross-level preference pairs whose noise difference exceeds
// min_gap. Trajectories from the same level are considered equally preferred
// and generate no pair. Fewer than two levels is an error.
RankedDataset build_ranked_dataset(std::vector<RolloutGroup> groups,
                                   double min_gap = 0.0);

// A contiguous crop of a trajectory; only the state sequence matters for
// reward learning.
struct Snippet {
  int trajectory_index = 0;
  int start = 0;
  std::vector<int> states;

  int length() const { return static_cast<int>(states.size()); }
};

struct SnippetPair {
  Snippet worse;
  Snippet better;
};

struct SnippetConfig {
  int n_pairs = 40000;
  int len_min = 10;
  int len_max = 50;
  // When set, the preferred snippet starts no earlier than the dispreferred
  // one.
  bool progress = true;
  // Equal-length crops neutralize the length bias of summed scores.
  bool equal_length = true;
};

// Samples training pairs: pick a valid level pair, one trajectory per level,
// then crop each. Trajectories shorter than len_min are skipped and
// resampled; it is an error if no valid trajectory exists at some level.
std::vector<SnippetPair> sample_snippet_pairs(const RankedDataset& dataset,
                                              const SnippetConfig& config,
                                              std::uint64_t seed);

// Turns two whole trajectories into a snippet pair (no cropping).
SnippetPair whole_trajectory_pair(const RankedDataset& dataset, int worse_index,
                                  int better_index);

}  // namespace drex
