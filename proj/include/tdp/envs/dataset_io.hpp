#pragma once

#include <json.hpp>

#include <fstream>
#include <sstream>
#include <string>

#include "tdp/core/errors.hpp"
#include "tdp/envs/dataset.hpp"

namespace tdp {

// Newline-delimited JSON: one schema header line, then one line per trajectory.
// Doubles are written with round-trip precision, so save/load is bit-exact.

inline constexpr const char* kDatasetFormat = "tdp-dataset";
inline constexpr int kDatasetVersion = 1;

namespace detail {
inline nlohmann::json vec_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }
inline Vec json_vec(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}
inline nlohmann::json mat_json(const Mat& m) {
  nlohmann::json cols = nlohmann::json::array();
  for (Eigen::Index j = 0; j < m.cols(); ++j) cols.push_back(vec_json(m.col(j)));
  return cols;
}
inline Mat json_mat(const nlohmann::json& j, int rows) {
  Mat m(rows, static_cast<Eigen::Index>(j.size()));
  for (std::size_t c = 0; c < j.size(); ++c) {
    const Vec v = json_vec(j[c]);
    if (v.size() != rows) throw InputError("dataset record has wrong row dimension");
    m.col(static_cast<Eigen::Index>(c)) = v;
  }
  return m;
}
}  // namespace detail

inline void write_dataset(std::ostream& out, const Dataset& ds) {
  nlohmann::json head = {
      {"format", kDatasetFormat},
      {"version", kDatasetVersion},
      {"env", ds.env_id},
      {"tier", std::string(to_string(ds.tier))},
      {"state_dim", ds.state_dim},
      {"action_dim", ds.action_dim},
      {"episode_length", ds.episode_length},
      {"episodes", ds.trajectories.size()},
      {"norm",
       {{"state_mean", detail::vec_json(ds.stats.state_mean)},
        {"state_std", detail::vec_json(ds.stats.state_std)},
        {"action_mean", detail::vec_json(ds.stats.action_mean)},
        {"action_std", detail::vec_json(ds.stats.action_std)},
        {"action_low", ds.stats.action_low},
        {"action_high", ds.stats.action_high}}}};
  out << head.dump() << '\n';
  for (const auto& t : ds.trajectories) {
    nlohmann::json rec = {{"states", detail::mat_json(t.states)},
                          {"actions", detail::mat_json(t.actions)},
                          {"rewards", detail::vec_json(t.rewards)},
                          {"terminal", t.terminal}};
    out << rec.dump() << '\n';
  }
}

inline Dataset read_dataset(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw InputError("dataset file is empty");
  const auto head = nlohmann::json::parse(line);
  if (head.value("format", "") != kDatasetFormat) throw InputError("not a tdp dataset file");
  if (head.value("version", 0) != kDatasetVersion) throw InputError("unsupported dataset version");
  Dataset ds;
  ds.env_id = head.at("env").get<std::string>();
  ds.tier = parse_tier(head.at("tier").get<std::string>());
  ds.state_dim = head.at("state_dim").get<int>();
  ds.action_dim = head.at("action_dim").get<int>();
  ds.episode_length = head.at("episode_length").get<int>();
  const auto& n = head.at("norm");
  ds.stats.state_mean = detail::json_vec(n.at("state_mean"));
  ds.stats.state_std = detail::json_vec(n.at("state_std"));
  ds.stats.action_mean = detail::json_vec(n.at("action_mean"));
  ds.stats.action_std = detail::json_vec(n.at("action_std"));
  ds.stats.action_low = n.at("action_low").get<std::vector<double>>();
  ds.stats.action_high = n.at("action_high").get<std::vector<double>>();
  const auto episodes = head.at("episodes").get<std::size_t>();
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto rec = nlohmann::json::parse(line);
    Trajectory t;
    t.states = detail::json_mat(rec.at("states"), ds.state_dim);
    t.actions = detail::json_mat(rec.at("actions"), ds.action_dim);
    t.rewards = detail::json_vec(rec.at("rewards"));
    t.terminal = rec.at("terminal").get<bool>();
    if (t.states.cols() != t.rewards.size() || t.actions.cols() != t.rewards.size()) {
      throw InputError("trajectory record has inconsistent lengths");
    }
    ds.trajectories.push_back(std::move(t));
  }
  if (ds.trajectories.size() != episodes) throw InputError("dataset episode count does not match its header");
  return ds;
}

inline void save_dataset(const std::string& path, const Dataset& ds) {
  std::ofstream f(path);
  if (!f) throw ConfigError("cannot write dataset: " + path);
  write_dataset(f, ds);
}

inline Dataset load_dataset(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read dataset: " + path);
  return read_dataset(f);
}

}  // namespace tdp
