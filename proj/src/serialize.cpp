#include "drex/serialize.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace drex {

using nlohmann::json;

namespace {

// Converts a nlohmann byte offset into line:column for parse diagnostics.
std::string locate(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

json parse(const std::string& text, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string(what) + ": parse error at " +
                          locate(text, e.byte) + ": " + e.what());
  }
}

void expect_type(const json& j, const char* tag, const char* what) {
  if (!j.is_object() || !j.contains("type") || j["type"] != tag)
    throw ValidationError(std::string(what) + ": expected document with type \"" +
                          tag + "\"");
}

Eigen::VectorXd vector_from(const json& j, const char* what) {
  if (!j.is_array()) throw ValidationError(std::string(what) + ": expected array");
  Eigen::VectorXd v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number())
      throw ValidationError(std::string(what) + "[" + std::to_string(i) +
                            "]: expected number");
    v[static_cast<int>(i)] = j[i].get<double>();
  }
  return v;
}

json vector_to(const Eigen::VectorXd& v) {
  json j = json::array();
  for (int i = 0; i < v.size(); ++i) j.push_back(v[i]);
  return j;
}

}  // namespace

std::string mdp_to_json(const Mdp& mdp) {
  json j;
  j["type"] = "mdp";
  j["n_states"] = mdp.n_states();
  j["n_actions"] = mdp.n_actions();
  j["gamma"] = mdp.discount();
  if (mdp.horizon()) j["horizon"] = *mdp.horizon();
  else j["horizon"] = nullptr;
  j["initial_distribution"] = vector_to(mdp.initial_distribution());
  // P[s][a][s'] flattened row-major.
  json flat = json::array();
  for (int s = 0; s < mdp.n_states(); ++s)
    for (int a = 0; a < mdp.n_actions(); ++a)
      for (int s2 = 0; s2 < mdp.n_states(); ++s2)
        flat.push_back(mdp.transition(s, a, s2));
  j["transitions"] = std::move(flat);
  json feats = json::array();
  for (int s = 0; s < mdp.n_states(); ++s)
    feats.push_back(vector_to(mdp.features().row(s).transpose()));
  j["features"] = std::move(feats);
  j["true_weights"] = vector_to(mdp.true_weights());
  return j.dump(2);
}

Mdp mdp_from_json(const std::string& text) {
  const json j = parse(text, "mdp");
  expect_type(j, "mdp", "mdp");
  for (const char* key : {"n_states", "n_actions", "gamma", "initial_distribution",
                          "transitions", "features", "true_weights"})
    if (!j.contains(key))
      throw ValidationError(std::string("mdp: missing field \"") + key + "\"");

  const int n = j["n_states"].get<int>();
  const int a = j["n_actions"].get<int>();
  if (n < 1 || a < 1) throw ValidationError("mdp: n_states and n_actions must be >= 1");
  const auto& flat = j["transitions"];
  if (!flat.is_array() || flat.size() != static_cast<std::size_t>(n) * a * n)
    throw ValidationError("mdp: transitions must hold n_states*n_actions*n_states "
                          "numbers (got " + std::to_string(flat.size()) + ")");
  std::vector<Eigen::MatrixXd> transitions(a, Eigen::MatrixXd::Zero(n, n));
  std::size_t at = 0;
  for (int s = 0; s < n; ++s)
    for (int act = 0; act < a; ++act)
      for (int s2 = 0; s2 < n; ++s2) {
        if (!flat[at].is_number())
          throw ValidationError("mdp: transitions[" + std::to_string(at) +
                                "]: expected number");
        transitions[act](s, s2) = flat[at++].get<double>();
      }

  const auto& feats = j["features"];
  if (!feats.is_array() || feats.size() != static_cast<std::size_t>(n))
    throw ValidationError("mdp: features must hold one row per state");
  Eigen::MatrixXd features;
  for (int s = 0; s < n; ++s) {
    const Eigen::VectorXd row =
        vector_from(feats[s], ("mdp: features[" + std::to_string(s) + "]").c_str());
    if (s == 0) features.resize(n, row.size());
    else if (row.size() != features.cols())
      throw ValidationError("mdp: features[" + std::to_string(s) +
                            "] has inconsistent length");
    features.row(s) = row.transpose();
  }

  std::optional<int> horizon;
  if (j.contains("horizon") && !j["horizon"].is_null())
    horizon = j["horizon"].get<int>();

  return Mdp(std::move(transitions), std::move(features),
             vector_from(j["true_weights"], "mdp: true_weights"), j["gamma"].get<double>(),
             vector_from(j["initial_distribution"], "mdp: initial_distribution"), horizon);
}

std::string policy_to_json(const Policy& policy) {
  json j;
  j["type"] = "policy";
  j["n_states"] = policy.n_states();
  j["n_actions"] = policy.n_actions();
  j["provenance"] = to_string(policy.provenance);
  json rows = json::array();
  for (int s = 0; s < policy.n_states(); ++s)
    rows.push_back(vector_to(policy.action_probs.row(s).transpose()));
  j["action_probs"] = std::move(rows);
  return j.dump(2);
}

Policy policy_from_json(const std::string& text) {
  const json j = parse(text, "policy");
  expect_type(j, "policy", "policy");
  for (const char* key : {"n_states", "n_actions", "action_probs", "provenance"})
    if (!j.contains(key))
      throw ValidationError(std::string("policy: missing field \"") + key + "\"");
  const int n = j["n_states"].get<int>();
  const int a = j["n_actions"].get<int>();
  const auto& rows = j["action_probs"];
  if (!rows.is_array() || rows.size() != static_cast<std::size_t>(n))
    throw ValidationError("policy: action_probs must hold one row per state");
  Policy policy;
  policy.action_probs.resize(n, a);
  for (int s = 0; s < n; ++s) {
    const Eigen::VectorXd row =
        vector_from(rows[s], ("policy: action_probs[" + std::to_string(s) + "]").c_str());
    if (row.size() != a)
      throw ValidationError("policy: action_probs[" + std::to_string(s) +
                            "] has wrong length");
    policy.action_probs.row(s) = row.transpose();
  }
  policy.provenance = provenance_from_string(j["provenance"].get<std::string>());
  policy.validate();
  return policy;
}

namespace {

json trajectory_to(const Trajectory& traj) {
  json steps = json::array();
  for (const Step& st : traj.steps) steps.push_back(json::array({st.state, st.action}));
  json j;
  j["steps"] = std::move(steps);
  if (traj.noise_level) j["noise_level"] = *traj.noise_level;
  else j["noise_level"] = nullptr;
  return j;
}

Trajectory trajectory_from(const json& j, const std::string& where) {
  if (!j.is_object() || !j.contains("steps") || !j["steps"].is_array())
    throw ValidationError(where + ": expected object with a steps array");
  Trajectory traj;
  for (std::size_t i = 0; i < j["steps"].size(); ++i) {
    const auto& st = j["steps"][i];
    if (!st.is_array() || st.size() != 2 || !st[0].is_number_integer() ||
        !st[1].is_number_integer())
      throw ValidationError(where + ".steps[" + std::to_string(i) +
                            "]: expected [state, action]");
    traj.steps.push_back({st[0].get<int>(), st[1].get<int>()});
  }
  if (traj.steps.empty()) throw ValidationError(where + ": empty trajectory");
  if (j.contains("noise_level") && !j["noise_level"].is_null()) {
    traj.noise_level = j["noise_level"].get<double>();
    if (*traj.noise_level < 0.0 || *traj.noise_level > 1.0)
      throw ValidationError(where + ": noise_level outside [0, 1]");
  }
  return traj;
}

}  // namespace

std::string trajectories_to_json(std::span<const Trajectory> trajectories) {
  json j;
  j["type"] = "trajectories";
  json items = json::array();
  for (const Trajectory& traj : trajectories) items.push_back(trajectory_to(traj));
  j["items"] = std::move(items);
  return j.dump(2);
}

std::vector<Trajectory> trajectories_from_json(const std::string& text) {
  const json j = parse(text, "trajectories");
  expect_type(j, "trajectories", "trajectories");
  if (!j.contains("items") || !j["items"].is_array())
    throw ValidationError("trajectories: missing items array");
  std::vector<Trajectory> out;
  for (std::size_t i = 0; i < j["items"].size(); ++i)
    out.push_back(trajectory_from(j["items"][i], "trajectories.items[" + std::to_string(i) + "]"));
  return out;
}

std::string rollout_groups_to_json(std::span<const RolloutGroup> groups) {
  json j;
  j["type"] = "rollout_groups";
  json gs = json::array();
  for (const RolloutGroup& g : groups) {
    json gj;
    gj["epsilon"] = g.epsilon;
    json items = json::array();
    for (const Trajectory& traj : g.trajectories) items.push_back(trajectory_to(traj));
    gj["trajectories"] = std::move(items);
    gs.push_back(std::move(gj));
  }
  j["groups"] = std::move(gs);
  return j.dump(2);
}

std::vector<RolloutGroup> rollout_groups_from_json(const std::string& text) {
  const json j = parse(text, "rollout_groups");
  expect_type(j, "rollout_groups", "rollout_groups");
  if (!j.contains("groups") || !j["groups"].is_array())
    throw ValidationError("rollout_groups: missing groups array");
  std::vector<RolloutGroup> out;
  for (std::size_t gi = 0; gi < j["groups"].size(); ++gi) {
    const auto& gj = j["groups"][gi];
    const std::string where = "rollout_groups.groups[" + std::to_string(gi) + "]";
    if (!gj.is_object() || !gj.contains("epsilon") || !gj.contains("trajectories"))
      throw ValidationError(where + ": expected epsilon and trajectories");
    RolloutGroup g;
    g.epsilon = gj["epsilon"].get<double>();
    if (g.epsilon < 0.0 || g.epsilon > 1.0)
      throw ValidationError(where + ": epsilon outside [0, 1]");
    for (std::size_t ti = 0; ti < gj["trajectories"].size(); ++ti)
      g.trajectories.push_back(trajectory_from(
          gj["trajectories"][ti], where + ".trajectories[" + std::to_string(ti) + "]"));
    out.push_back(std::move(g));
  }
  return out;
}

std::string ranked_dataset_to_json(const RankedDataset& dataset) {
  json j;
  j["type"] = "ranked_dataset";
  j["min_gap"] = dataset.min_gap;
  json gs = json::array();
  for (const RolloutGroup& g : dataset.groups) {
    json gj;
    gj["epsilon"] = g.epsilon;
    json items = json::array();
    for (const Trajectory& traj : g.trajectories) items.push_back(trajectory_to(traj));
    gj["trajectories"] = std::move(items);
    gs.push_back(std::move(gj));
  }
  j["groups"] = std::move(gs);
  json pairs = json::array();
  for (const auto& [worse, better] : dataset.pairs)
    pairs.push_back(json::array({worse, better}));
  j["pairs"] = std::move(pairs);
  return j.dump(2);
}

RankedDataset ranked_dataset_from_json(const std::string& text) {
  const json j = parse(text, "ranked_dataset");
  expect_type(j, "ranked_dataset", "ranked_dataset");
  if (!j.contains("groups") || !j.contains("pairs") || !j.contains("min_gap"))
    throw ValidationError("ranked_dataset: missing groups, pairs or min_gap");
  // Rebuild through the constructor so pair invariants are re-derived and
  // checked against the stored pair list.
  json groups_doc;
  groups_doc["type"] = "rollout_groups";
  groups_doc["groups"] = j["groups"];
  std::vector<RolloutGroup> groups = rollout_groups_from_json(groups_doc.dump());
  RankedDataset rebuilt = build_ranked_dataset(std::move(groups), j["min_gap"].get<double>());
  std::vector<std::pair<int, int>> stored;
  for (std::size_t i = 0; i < j["pairs"].size(); ++i) {
    const auto& p = j["pairs"][i];
    if (!p.is_array() || p.size() != 2)
      throw ValidationError("ranked_dataset.pairs[" + std::to_string(i) +
                            "]: expected [worse, better]");
    stored.emplace_back(p[0].get<int>(), p[1].get<int>());
  }
  if (stored != rebuilt.pairs)
    throw ValidationError("ranked_dataset: stored pair list does not match the "
                          "pairs implied by the groups and min_gap");
  return rebuilt;
}

struct RewardModelIo {
  static json to_json(const RewardModel& m) {
    json j;
    if (m.kind() == RewardKind::linear) {
      j["kind"] = "linear";
      j["weights"] = vector_to(m.weights());
      return j;
    }
    j["kind"] = "mlp";
    j["layers"] = json::array({m.input_dim(), m.hidden_units(), 1});
    j["leaky_slope"] = m.leaky_slope();
    json w1 = json::array();
    for (int i = 0; i < m.w1_.rows(); ++i)
      for (int k = 0; k < m.w1_.cols(); ++k) w1.push_back(m.w1_(i, k));
    j["w1"] = std::move(w1);
    j["b1"] = vector_to(m.b1_);
    j["w2"] = vector_to(m.w2_);
    j["b2"] = m.b2_;
    return j;
  }

  static RewardModel from_json(const json& j, const std::string& where) {
    if (!j.is_object() || !j.contains("kind"))
      throw ValidationError(where + ": expected reward model object");
    const std::string kind = j["kind"].get<std::string>();
    if (kind == "linear") {
      if (!j.contains("weights")) throw ValidationError(where + ": missing weights");
      return RewardModel::linear(vector_from(j["weights"], (where + ".weights").c_str()));
    }
    if (kind != "mlp") throw ValidationError(where + ": unknown kind \"" + kind + "\"");
    for (const char* key : {"layers", "leaky_slope", "w1", "b1", "w2", "b2"})
      if (!j.contains(key))
        throw ValidationError(where + ": missing field \"" + std::string(key) + "\"");
    const auto& layers = j["layers"];
    if (!layers.is_array() || layers.size() != 3 || layers[2].get<int>() != 1)
      throw ValidationError(where + ": layers must be [input, hidden, 1]");
    const int dim = layers[0].get<int>();
    const int hidden = layers[1].get<int>();
    Rng dummy(0);
    RewardModel m = RewardModel::mlp(dim, hidden, dummy, j["leaky_slope"].get<double>());
    const Eigen::VectorXd w1 = vector_from(j["w1"], (where + ".w1").c_str());
    if (w1.size() != static_cast<long>(hidden) * dim)
      throw ValidationError(where + ".w1: expected hidden*input values");
    for (int i = 0; i < hidden; ++i)
      for (int k = 0; k < dim; ++k) m.w1_(i, k) = w1[i * dim + k];
    m.b1_ = vector_from(j["b1"], (where + ".b1").c_str());
    m.w2_ = vector_from(j["w2"], (where + ".w2").c_str());
    if (m.b1_.size() != hidden || m.w2_.size() != hidden)
      throw ValidationError(where + ": b1/w2 must have `hidden` entries");
    m.b2_ = j["b2"].get<double>();
    if (!m.get_params().allFinite())
      throw ValidationError(where + ": non-finite parameters");
    return m;
  }
};

std::string reward_function_to_json(const RewardFunction& fn) {
  json j;
  j["type"] = "reward_function";
  json members = json::array();
  for (const RewardModel& m : fn.members) members.push_back(RewardModelIo::to_json(m));
  j["members"] = std::move(members);
  return j.dump(2);
}

RewardFunction reward_function_from_json(const std::string& text) {
  const json j = parse(text, "reward_function");
  expect_type(j, "reward_function", "reward_function");
  if (!j.contains("members") || !j["members"].is_array() || j["members"].empty())
    throw ValidationError("reward_function: missing non-empty members array");
  RewardFunction fn;
  for (std::size_t i = 0; i < j["members"].size(); ++i)
    fn.members.push_back(RewardModelIo::from_json(
        j["members"][i], "reward_function.members[" + std::to_string(i) + "]"));
  return fn;
}

std::string training_report_to_json(const TrainReport& report) {
  json j;
  j["type"] = "train_report";
  j["train_loss"] = report.train_loss;
  j["validation_loss"] = report.validation_loss;
  j["stopping_epoch"] = report.stopping_epoch;
  j["best_validation_loss"] = report.best_validation_loss;
  j["validation_accuracy"] = report.validation_accuracy;
  j["early_stopped"] = report.early_stopped;
  return j.dump(2);
}

void write_text_file(const std::filesystem::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open for writing: " + path.string());
  out << contents;
  if (!out) throw Error("write failed: " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open for reading: " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

std::string csv_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", x);
  return buf;
}

void CsvWriter::add_row(std::vector<std::string> cells) {
  if (cells.size() != header_.size())
    throw ValidationError("csv row has " + std::to_string(cells.size()) +
                          " cells, header has " + std::to_string(header_.size()));
  rows_.push_back(std::move(cells));
}

std::string CsvWriter::str() const {
  std::ostringstream out;
  auto emit = [&out](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out << ',';
      out << cells[i];
    }
    out << '\n';
  };
  emit(header_);
  for (const auto& row : rows_) emit(row);
  return out.str();
}

void CsvWriter::write(const std::filesystem::path& path) const {
  write_text_file(path, str());
}

}  // namespace drex
