#include "drex/ranking.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "drex/errors.hpp"

namespace drex {

int RankedDataset::total_trajectories() const {
  int n = 0;
  for (const RolloutGroup& g : groups) n += static_cast<int>(g.trajectories.size());
  return n;
}

const Trajectory& RankedDataset::trajectory(int index) const {
  int i = index;
  for (const RolloutGroup& g : groups) {
    const int sz = static_cast<int>(g.trajectories.size());
    if (i < sz) return g.trajectories[i];
    i -= sz;
  }
  throw ValidationError("ranked dataset: trajectory index " + std::to_string(index) +
                        " out of range");
}

double RankedDataset::noise_of(int index) const {
  int i = index;
  for (const RolloutGroup& g : groups) {
    const int sz = static_cast<int>(g.trajectories.size());
    if (i < sz) return g.epsilon;
    i -= sz;
  }
  throw ValidationError("ranked dataset: trajectory index " + std::to_string(index) +
                        " out of range");
}

RankedDataset build_ranked_dataset(std::vector<RolloutGroup> groups, double min_gap) {
  int distinct = 0;
  for (std::size_t i = 0; i < groups.size(); ++i) {
    bool seen = false;
    for (std::size_t j = 0; j < i; ++j)
      if (groups[j].epsilon == groups[i].epsilon) seen = true;
    if (!seen) ++distinct;
  }
  if (distinct < 2)
    throw InsufficientLevelsError(
        "build_ranked_dataset: at least two distinct noise levels required, got " +
        std::to_string(distinct));
  if (min_gap < 0.0) throw DomainError("build_ranked_dataset: min_gap must be >= 0");

  RankedDataset dataset;
  dataset.groups = std::move(groups);
  dataset.min_gap = min_gap;

  std::vector<int> offsets;
  int offset = 0;
  for (const RolloutGroup& g : dataset.groups) {
    offsets.push_back(offset);
    offset += static_cast<int>(g.trajectories.size());
  }

  for (std::size_t gi = 0; gi < dataset.groups.size(); ++gi) {
    for (std::size_t gj = 0; gj < dataset.groups.size(); ++gj) {
      // Group gi is noisier: every trajectory of gi is dispreferred to every
      // trajectory of gj.
      if (dataset.groups[gi].epsilon - dataset.groups[gj].epsilon <= min_gap) continue;
      for (std::size_t ti = 0; ti < dataset.groups[gi].trajectories.size(); ++ti)
        for (std::size_t tj = 0; tj < dataset.groups[gj].trajectories.size(); ++tj)
          dataset.pairs.emplace_back(offsets[gi] + static_cast<int>(ti),
                                     offsets[gj] + static_cast<int>(tj));
    }
  }
  return dataset;
}

namespace {

Snippet crop(const Trajectory& traj, int traj_index, int start, int length) {
  Snippet s;
  s.trajectory_index = traj_index;
  s.start = start;
  s.states.reserve(length);
  for (int t = start; t < start + length; ++t) s.states.push_back(traj.steps[t].state);
  return s;
}

}  // namespace

std::vector<SnippetPair> sample_snippet_pairs(const RankedDataset& dataset,
                                              const SnippetConfig& config,
                                              std::uint64_t seed) {
  if (config.len_min < 1 || config.len_max < config.len_min)
    throw DomainError("sample_snippet_pairs: need 1 <= len_min <= len_max");
  if (config.n_pairs < 1) throw DomainError("sample_snippet_pairs: n_pairs must be >= 1");

  // Level pairs that respect the dataset's min_gap and have at least one
  // usable (long enough) trajectory on both sides.
  std::vector<int> offsets;
  int offset = 0;
  for (const RolloutGroup& g : dataset.groups) {
    offsets.push_back(offset);
    offset += static_cast<int>(g.trajectories.size());
  }
  auto usable = [&](const RolloutGroup& g) {
    std::vector<int> idx;
    for (std::size_t t = 0; t < g.trajectories.size(); ++t)
      if (g.trajectories[t].length() >= config.len_min) idx.push_back(static_cast<int>(t));
    return idx;
  };
  std::vector<std::vector<int>> usable_by_group;
  for (const RolloutGroup& g : dataset.groups) usable_by_group.push_back(usable(g));

  std::vector<std::pair<int, int>> level_pairs;  // (noisier group, cleaner group)
  for (std::size_t gi = 0; gi < dataset.groups.size(); ++gi)
    for (std::size_t gj = 0; gj < dataset.groups.size(); ++gj)
      if (dataset.groups[gi].epsilon - dataset.groups[gj].epsilon > dataset.min_gap &&
          !usable_by_group[gi].empty() && !usable_by_group[gj].empty())
        level_pairs.emplace_back(static_cast<int>(gi), static_cast<int>(gj));
  if (level_pairs.empty())
    throw ValidationError(
        "sample_snippet_pairs: no level pair has trajectories of length >= len_min");

  Rng rng(seed);
  std::vector<SnippetPair> result;
  result.reserve(config.n_pairs);
  for (int k = 0; k < config.n_pairs; ++k) {
    const auto [gi, gj] = level_pairs[rng.uniform_int(static_cast<int>(level_pairs.size()))];
    const int ti = usable_by_group[gi][rng.uniform_int(
        static_cast<int>(usable_by_group[gi].size()))];
    const int tj = usable_by_group[gj][rng.uniform_int(
        static_cast<int>(usable_by_group[gj].size()))];
    const Trajectory& worse = dataset.groups[gi].trajectories[ti];
    const Trajectory& better = dataset.groups[gj].trajectories[tj];

    const int cap = std::min({config.len_max, worse.length(), better.length()});
    int len_worse, len_better;
    if (config.equal_length) {
      len_worse = len_better = config.len_min + rng.uniform_int(cap - config.len_min + 1);
    } else {
      const int cap_w = std::min(config.len_max, worse.length());
      const int cap_b = std::min(config.len_max, better.length());
      len_worse = config.len_min + rng.uniform_int(cap_w - config.len_min + 1);
      len_better = config.len_min + rng.uniform_int(cap_b - config.len_min + 1);
    }

    int start_worse, start_better;
    if (config.progress) {
      // Dispreferred snippet first, capped so the preferred one can start at
      // or after it.
      const int max_start_worse =
          std::min(worse.length() - len_worse, better.length() - len_better);
      start_worse = rng.uniform_int(max_start_worse + 1);
      start_better =
          start_worse + rng.uniform_int(better.length() - len_better - start_worse + 1);
    } else {
      start_worse = rng.uniform_int(worse.length() - len_worse + 1);
      start_better = rng.uniform_int(better.length() - len_better + 1);
    }

    SnippetPair pair;
    pair.worse = crop(worse, offsets[gi] + ti, start_worse, len_worse);
    pair.better = crop(better, offsets[gj] + tj, start_better, len_better);
    result.push_back(std::move(pair));
  }
  return result;
}

SnippetPair whole_trajectory_pair(const RankedDataset& dataset, int worse_index,
                                  int better_index) {
  const Trajectory& worse = dataset.trajectory(worse_index);
  const Trajectory& better = dataset.trajectory(better_index);
  SnippetPair pair;
  pair.worse = crop(worse, worse_index, 0, worse.length());
  pair.better = crop(better, better_index, 0, better.length());
  return pair;
}

}  // namespace drex
