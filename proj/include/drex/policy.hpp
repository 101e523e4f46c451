#pragma once

#include <Eigen/Dense>
#include <string>

#include "drex/errors.hpp"

namespace drex {

enum class PolicyProvenance { optimal, truncated, cloned, epsilon_wrapped, learned };

std::string to_string(PolicyProvenance p);
PolicyProvenance provenance_from_string(const std::string& s);

// Tabular stochastic policy. Row s of action_probs is the action
// distribution in state s.
struct Policy {
  Eigen::MatrixXd action_probs;  // n_states x n_actions
  PolicyProvenance provenance = PolicyProvenance::learned;

  int n_states() const { return static_cast<int>(action_probs.rows()); }
  int n_actions() const { return static_cast<int>(action_probs.cols()); }

  // Rows sum to 1 within 1e-9 and all entries are non-negative.
  void validate() const;

  // Highest-probability action; ties broken by lowest action index.
  int greedy_action(int state) const;

  static Policy uniform(int n_states, int n_actions);
  static Policy deterministic(const std::vector<int>& actions, int n_actions,
                              PolicyProvenance provenance);
};

}  // namespace drex
