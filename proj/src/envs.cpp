#include "drex/envs.hpp"

#include <algorithm>

#include "drex/errors.hpp"

namespace drex {

namespace {

// Shared gridworld builder. Terrain codes index one-hot features; cells in
// `absorbing` ignore actions and self-loop. Moves that would leave the grid
// stay in place; otherwise the intended direction succeeds with probability
// 1 - slip and each other direction gets slip / 3.
Mdp make_gridworld(int rows, int cols, const std::vector<int>& terrain,
                   int n_terrain_types, const Eigen::VectorXd& weights,
                   const std::vector<bool>& absorbing, double slip, double gamma,
                   int horizon, int start_state) {
  const int n = rows * cols;
  const int kActions = 4;  // up, down, left, right
  const int dr[kActions] = {-1, 1, 0, 0};
  const int dc[kActions] = {0, 0, -1, 1};

  std::vector<Eigen::MatrixXd> transitions(kActions, Eigen::MatrixXd::Zero(n, n));
  for (int s = 0; s < n; ++s) {
    if (absorbing[s]) {
      for (int a = 0; a < kActions; ++a) transitions[a](s, s) = 1.0;
      continue;
    }
    const int r = s / cols;
    const int c = s % cols;
    auto destination = [&](int dir) {
      const int nr = r + dr[dir];
      const int nc = c + dc[dir];
      if (nr < 0 || nr >= rows || nc < 0 || nc >= cols) return s;
      return nr * cols + nc;
    };
    for (int a = 0; a < kActions; ++a) {
      transitions[a](s, destination(a)) += 1.0 - slip;
      for (int other = 0; other < kActions; ++other) {
        if (other == a) continue;
        transitions[a](s, destination(other)) += slip / 3.0;
      }
    }
  }

  Eigen::MatrixXd features = Eigen::MatrixXd::Zero(n, n_terrain_types);
  for (int s = 0; s < n; ++s) features(s, terrain[s]) = 1.0;

  Eigen::VectorXd init = Eigen::VectorXd::Zero(n);
  init[start_state] = 1.0;

  return Mdp(std::move(transitions), std::move(features), weights, gamma,
             std::move(init), horizon);
}

}  // namespace

Mdp make_terrain_world() {
  const int rows = 8, cols = 8;
  // 0 plain, 1 mud, 2 water, 3 goal. Start top-left, goal bottom-right;
  // mud and water patches price the direct diagonal.
  const char* layout[rows] = {
      "........",  //
      "..mm....",  //
      "..mw.m..",  //
      "....wm..",  //
      ".mw.....",  //
      "...wwm..",  //
      ".m...w..",  //
      "....m..g",
  };
  std::vector<int> terrain(rows * cols, 0);
  std::vector<bool> absorbing(rows * cols, false);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const int s = r * cols + c;
      switch (layout[r][c]) {
        case 'm': terrain[s] = 1; break;
        case 'w': terrain[s] = 2; break;
        case 'g':
          terrain[s] = 3;
          absorbing[s] = true;
          break;
        default: terrain[s] = 0;
      }
    }
  }
  Eigen::VectorXd weights(4);
  weights << -0.05, -0.3, -0.6, 1.0;  // normalized to ||w||_1 = 1 on construction
  return make_gridworld(rows, cols, terrain, 4, weights, absorbing, 0.1, 0.95, 40, 0);
}

Mdp make_lava_world() {
  const int rows = 5, cols = 5;
  // 0 plain, 1 lava (absorbing), 2 goal (absorbing). The bottom row and the
  // last column form a lava-free corridor with a one-cell margin.
  const char* layout[rows] = {
      "....g",  //
      ".LL..",  //
      ".L...",  //
      ".....",  //
      "s....",
  };
  std::vector<int> terrain(rows * cols, 0);
  std::vector<bool> absorbing(rows * cols, false);
  int start = 0;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const int s = r * cols + c;
      switch (layout[r][c]) {
        case 'L':
          terrain[s] = 1;
          absorbing[s] = true;
          break;
        case 'g':
          terrain[s] = 2;
          absorbing[s] = true;
          break;
        case 's':
          start = s;
          terrain[s] = 0;
          break;
        default: terrain[s] = 0;
      }
    }
  }
  Eigen::VectorXd weights(3);
  weights << -0.05, -0.8, 0.6;
  return make_gridworld(rows, cols, terrain, 3, weights, absorbing, 0.1, 0.95, 30, start);
}

Mdp make_prop1_mdp(double delta, double gamma) {
  if (!(delta > 0.0)) throw DomainError("make_prop1_mdp: delta must be positive");
  const int n = 4;
  std::vector<Eigen::MatrixXd> transitions(3, Eigen::MatrixXd::Zero(n, n));
  for (int a = 0; a < 3; ++a) {
    transitions[a](0, a + 1) = 1.0;  // a -> s1, b -> s2, c -> s3
    for (int s = 1; s < n; ++s) transitions[a](s, s) = 1.0;
  }
  Eigen::MatrixXd features = Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd weights(n);
  weights << 0.0, 1.0, 0.0, -delta;
  Eigen::VectorXd init = Eigen::VectorXd::Zero(n);
  init[0] = 1.0;
  return Mdp(std::move(transitions), std::move(features), std::move(weights), gamma,
             std::move(init), 12);
}

Mdp make_random_mdp(int n_states, int n_actions, int feature_dim, double gamma,
                    Rng& rng, std::optional<int> horizon) {
  std::vector<Eigen::MatrixXd> transitions(n_actions, Eigen::MatrixXd::Zero(n_states, n_states));
  for (int a = 0; a < n_actions; ++a) {
    for (int s = 0; s < n_states; ++s) {
      double sum = 0.0;
      for (int s2 = 0; s2 < n_states; ++s2) {
        double u = rng.uniform();
        while (u <= 0.0) u = rng.uniform();
        transitions[a](s, s2) = -std::log(u);
        sum += transitions[a](s, s2);
      }
      transitions[a].row(s) /= sum;
    }
  }
  Eigen::MatrixXd features(n_states, feature_dim);
  for (int s = 0; s < n_states; ++s)
    for (int j = 0; j < feature_dim; ++j) features(s, j) = rng.uniform();
  Eigen::VectorXd weights(feature_dim);
  for (int j = 0; j < feature_dim; ++j) weights[j] = rng.uniform(-1.0, 1.0);
  const double l1 = weights.lpNorm<1>();
  if (l1 > 0.0) weights /= l1;
  Eigen::VectorXd init(n_states);
  double sum = 0.0;
  for (int s = 0; s < n_states; ++s) {
    init[s] = rng.uniform() + 1e-3;
    sum += init[s];
  }
  init /= sum;
  return Mdp(std::move(transitions), std::move(features), std::move(weights), gamma,
             std::move(init), horizon);
}

std::vector<std::string> builtin_environment_names() {
  return {"terrain8", "lava5", "prop1"};
}

bool is_builtin_environment(const std::string& name) {
  const auto names = builtin_environment_names();
  return std::find(names.begin(), names.end(), name) != names.end();
}

Mdp make_builtin_environment(const std::string& name) {
  if (name == "terrain8") return make_terrain_world();
  if (name == "lava5") return make_lava_world();
  if (name == "prop1") return make_prop1_mdp();
  throw ValidationError("unknown built-in environment: " + name);
}

}  // namespace drex
