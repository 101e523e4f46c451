#include "drex/policy.hpp"

#include <cmath>
#include <vector>

namespace drex {

std::string to_string(PolicyProvenance p) {
  switch (p) {
    case PolicyProvenance::optimal: return "optimal";
    case PolicyProvenance::truncated: return "truncated";
    case PolicyProvenance::cloned: return "cloned";
    case PolicyProvenance::epsilon_wrapped: return "epsilon-wrapped";
    case PolicyProvenance::learned: return "learned";
  }
  return "learned";
}

PolicyProvenance provenance_from_string(const std::string& s) {
  if (s == "optimal") return PolicyProvenance::optimal;
  if (s == "truncated") return PolicyProvenance::truncated;
  if (s == "cloned") return PolicyProvenance::cloned;
  if (s == "epsilon-wrapped") return PolicyProvenance::epsilon_wrapped;
  if (s == "learned") return PolicyProvenance::learned;
  throw ValidationError("unknown policy provenance: " + s);
}

void Policy::validate() const {
  for (int s = 0; s < n_states(); ++s) {
    double row_sum = 0.0;
    for (int a = 0; a < n_actions(); ++a) {
      const double p = action_probs(s, a);
      if (!(p >= 0.0) || !std::isfinite(p))
        throw ValidationError("policy: negative or non-finite probability at state " +
                              std::to_string(s) + ", action " + std::to_string(a));
      row_sum += p;
    }
    if (std::abs(row_sum - 1.0) > 1e-9)
      throw ValidationError("policy: action probabilities at state " +
                            std::to_string(s) + " sum to " + std::to_string(row_sum));
  }
}

int Policy::greedy_action(int state) const {
  int best = 0;
  double best_p = action_probs(state, 0);
  for (int a = 1; a < n_actions(); ++a) {
    if (action_probs(state, a) > best_p) {
      best_p = action_probs(state, a);
      best = a;
    }
  }
  return best;
}

Policy Policy::uniform(int n_states, int n_actions) {
  Policy p;
  p.action_probs = Eigen::MatrixXd::Constant(n_states, n_actions, 1.0 / n_actions);
  p.provenance = PolicyProvenance::epsilon_wrapped;
  return p;
}

Policy Policy::deterministic(const std::vector<int>& actions, int n_actions,
                             PolicyProvenance provenance) {
  Policy p;
  p.action_probs = Eigen::MatrixXd::Zero(static_cast<int>(actions.size()), n_actions);
  for (std::size_t s = 0; s < actions.size(); ++s) {
    if (actions[s] < 0 || actions[s] >= n_actions)
      throw ValidationError("deterministic policy: action index out of range at state " +
                            std::to_string(s));
    p.action_probs(static_cast<int>(s), actions[s]) = 1.0;
  }
  p.provenance = provenance;
  return p;
}

}  // namespace drex
