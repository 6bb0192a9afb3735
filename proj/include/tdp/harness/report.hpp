#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "tdp/core/errors.hpp"
#include "tdp/harness/evaluate.hpp"

namespace tdp {

/// Shortest decimal text that parses back to the same double; "nan" for NaN.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, res.ptr};
}

inline double parse_double(const std::string& s) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) throw InputError("bad number in CSV: " + s);
  return v;
}

inline std::string steps_csv_header(int action_dim) {
  std::string h = "seed,episode,t";
  for (int i = 0; i < action_dim; ++i) h += ",a" + std::to_string(i);
  return h + ",reward,criterion_value,replanned,element_passes,wall_ns";
}

inline void write_steps_csv(std::ostream& out, const std::vector<EpisodeResult>& results, int action_dim) {
  out << steps_csv_header(action_dim) << '\n';
  for (const auto& ep : results) {
    for (const auto& s : ep.steps) {
      out << s.seed << ',' << s.episode << ',' << s.t;
      for (Eigen::Index i = 0; i < s.action.size(); ++i) out << ',' << format_double(s.action[i]);
      out << ',' << format_double(s.reward) << ',' << format_double(s.criterion) << ',' << (s.replanned ? 1 : 0) << ','
          << s.element_passes << ',' << s.wall_ns << '\n';
    }
  }
}

/// Inverse of write_steps_csv; rows are regrouped into episodes in file order.
inline std::vector<EpisodeResult> read_steps_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw InputError("empty steps CSV");
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    for (std::string f; std::getline(ss, f, ',');) header.push_back(f);
  }
  const int action_dim = static_cast<int>(header.size()) - 8;
  if (action_dim < 1 || line != steps_csv_header(action_dim)) throw InputError("unexpected steps CSV header");

  std::vector<EpisodeResult> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string x; std::getline(ss, x, ',');) f.push_back(x);
    if (f.size() != header.size()) throw InputError("steps CSV row has " + std::to_string(f.size()) + " fields");
    StepRecord r;
    r.seed = std::stoull(f[0]);
    r.episode = std::stoi(f[1]);
    r.t = std::stoi(f[2]);
    r.action.resize(action_dim);
    for (int i = 0; i < action_dim; ++i) r.action[i] = parse_double(f[3 + static_cast<std::size_t>(i)]);
    const std::size_t o = 3 + static_cast<std::size_t>(action_dim);
    r.reward = parse_double(f[o]);
    r.criterion = parse_double(f[o + 1]);
    r.replanned = f[o + 2] == "1";
    r.element_passes = std::stol(f[o + 3]);
    r.wall_ns = std::stoll(f[o + 4]);
    if (out.empty() || out.back().seed != r.seed || out.back().episode != r.episode) {
      out.push_back(EpisodeResult{r.seed, r.episode, 0.0, {}, 0});
    }
    out.back().total_return += r.reward;
    out.back().planner_passes += r.element_passes;
    out.back().steps.push_back(std::move(r));
  }
  return out;
}

inline nlohmann::json to_json(const EfficiencyReport& r) {
  return {{"planner", r.planner},
          {"episodes", r.episodes},
          {"steps", r.steps},
          {"replans", r.replans},
          {"wall_ms", {{"mean", r.wall_mean_ms}, {"p50", r.wall_p50_ms}, {"p95", r.wall_p95_ms}}},
          {"decisions_per_second", r.decisions_per_second},
          {"passes_per_decision", r.passes_per_decision},
          {"replan_ratio", r.replan_ratio},
          {"avg_replan_interval", r.avg_replan_interval},
          {"return", {{"mean", r.return_mean}, {"stderr", r.return_stderr}, {"stderr_episodes", r.return_stderr_episodes}}},
          {"score", {{"mean", r.score_mean}, {"stderr", r.score_stderr}}}};
}

inline EfficiencyReport report_from_json(const nlohmann::json& j) {
  EfficiencyReport r;
  r.planner = j.at("planner").get<std::string>();
  r.episodes = j.at("episodes").get<long>();
  r.steps = j.at("steps").get<long>();
  r.replans = j.at("replans").get<long>();
  r.wall_mean_ms = j.at("wall_ms").at("mean").get<double>();
  r.wall_p50_ms = j.at("wall_ms").at("p50").get<double>();
  r.wall_p95_ms = j.at("wall_ms").at("p95").get<double>();
  r.decisions_per_second = j.at("decisions_per_second").get<double>();
  r.passes_per_decision = j.at("passes_per_decision").get<double>();
  r.replan_ratio = j.at("replan_ratio").get<double>();
  r.avg_replan_interval = j.at("avg_replan_interval").get<double>();
  r.return_mean = j.at("return").at("mean").get<double>();
  r.return_stderr = j.at("return").at("stderr").get<double>();
  r.return_stderr_episodes = j.at("return").at("stderr_episodes").get<double>();
  r.score_mean = j.at("score").at("mean").get<double>();
  r.score_stderr = j.at("score").at("stderr").get<double>();
  return r;
}

/// One point of a figure-style series.
struct PlotRow {
  double x = 0.0;
  double y = 0.0;
  std::string series;
};

inline void write_plot_csv(std::ostream& out, const std::vector<PlotRow>& rows) {
  out << "x,y,series\n";
  for (const auto& r : rows) out << format_double(r.x) << ',' << format_double(r.y) << ',' << r.series << '\n';
}

inline std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path);
  if (!f) throw ConfigError("cannot write " + path.string());
  return f;
}

inline void save_steps_csv(const std::filesystem::path& path, const std::vector<EpisodeResult>& results, int action_dim) {
  auto f = open_output(path);
  write_steps_csv(f, results, action_dim);
}

inline void save_plot_csv(const std::filesystem::path& path, const std::vector<PlotRow>& rows) {
  auto f = open_output(path);
  write_plot_csv(f, rows);
}

inline void save_json(const std::filesystem::path& path, const nlohmann::json& j) {
  auto f = open_output(path);
  f << j.dump(2) << '\n';
}

}  // namespace tdp
