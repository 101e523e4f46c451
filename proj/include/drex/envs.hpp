#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "drex/mdp.hpp"

namespace drex {

// 8x8 gridworld with four one-hot terrain classes (plain, mud, water, goal),
// slip probability 0.1, absorbing goal, horizon 40. Random, demonstrator and
// optimal returns are well separated.
Mdp make_terrain_world();

// 5x5 gridworld with plain / lava / goal terrain. Lava is absorbing and
// strongly negative; plain carries a step cost, so idling is safe but
// unrewarding. The optimal route keeps a one-cell margin from lava.
Mdp make_lava_world();

// The three-action counterexample MDP behind the ranking-ambiguity argument:
// s0 branches to three absorbing states with rewards 1, 0, -delta.
Mdp make_prop1_mdp(double delta = 10.0, double gamma = 0.9);

// Random dense tabular MDP for randomized theory suites.
Mdp make_random_mdp(int n_states, int n_actions, int feature_dim, double gamma,
                    Rng& rng, std::optional<int> horizon = std::nullopt);

// Registered names: "terrain8", "lava5", "prop1".
std::vector<std::string> builtin_environment_names();
bool is_builtin_environment(const std::string& name);
Mdp make_builtin_environment(const std::string& name);

}  // namespace drex
