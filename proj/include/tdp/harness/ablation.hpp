#pragma once

#include <algorithm>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "tdp/envs/dataset.hpp"
#include "tdp/harness/evaluate.hpp"
#include "tdp/harness/pipeline.hpp"
#include "tdp/harness/report.hpp"
#include "tdp/planner/agent.hpp"

namespace tdp {

/// One arm of an ablation. `x` is the swept quantity (interval, threshold or m).
struct ArmResult {
  std::string label;
  double x = 0.0;
  EfficiencyReport report;
};

inline nlohmann::json to_json(const std::vector<ArmResult>& arms) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& a : arms) out.push_back({{"label", a.label}, {"x", a.x}, {"report", to_json(a.report)}});
  return out;
}

/// Shared inputs of every arm: one environment, one model set, one seed list.
struct AblationSetup {
  PointMassEnv env;
  std::shared_ptr<const PlanningModels> models;
  PlannerConfig base;
  EvalOptions options;
  ReferenceReturns reference;
};

inline ArmResult run_arm(const AblationSetup& s, const PlannerConfig& cfg, std::string label, double x) {
  auto factory = [&s, cfg, label] { return std::make_unique<TdpPlanner>(s.models, cfg, label); };
  auto episodes = evaluate_planner(s.env, factory, s.options);
  return {label, x, summarize(episodes, s.reference, label)};
}

/// Plans from scratch every `interval` steps; a final arm uses automatic
/// (value-criterion) replanning with the base threshold.
inline std::vector<ArmResult> ablate_fixed_interval(const AblationSetup& s, const std::vector<int>& intervals) {
  std::vector<ArmResult> arms;
  for (int n : intervals) {
    PlannerConfig cfg = s.base;
    cfg.criterion = ReplanCriterion::every_n;
    cfg.interval = n;
    arms.push_back(run_arm(s, cfg, "interval_" + std::to_string(n), n));
  }
  PlannerConfig cfg = s.base;
  cfg.criterion = ReplanCriterion::value;
  ArmResult autoplan = run_arm(s, cfg, "auto", 0.0);
  autoplan.x = autoplan.report.avg_replan_interval;
  arms.push_back(std::move(autoplan));
  return arms;
}

inline std::vector<PlotRow> interval_plot(const std::vector<ArmResult>& arms) {
  std::vector<PlotRow> rows;
  double lo = 0.0, hi = 0.0;
  bool first = true;
  for (const auto& a : arms) {
    if (a.label == "auto") continue;
    rows.push_back({a.x, a.report.score_mean, "fixed_interval"});
    lo = first ? a.x : std::min(lo, a.x);
    hi = first ? a.x : std::max(hi, a.x);
    first = false;
  }
  for (const auto& a : arms) {
    if (a.label != "auto") continue;
    rows.push_back({lo, a.report.score_mean, "auto_replan"});
    rows.push_back({hi, a.report.score_mean, "auto_replan"});
  }
  return rows;
}

/// One arm per threshold for the given criterion.
inline std::vector<ArmResult> ablate_criterion(const AblationSetup& s, ReplanCriterion criterion,
                                               const std::vector<double>& thresholds) {
  std::vector<ArmResult> arms;
  for (double th : thresholds) {
    PlannerConfig cfg = s.base;
    cfg.criterion = criterion;
    cfg.threshold = th;
    arms.push_back(run_arm(s, cfg, std::string(to_string(criterion)) + "_" + format_double(th), th));
  }
  return arms;
}

/// Replan ratio never increases as the threshold grows (arms in threshold order).
inline bool replan_ratio_monotone(const std::vector<ArmResult>& arms) {
  for (std::size_t i = 1; i < arms.size(); ++i) {
    if (arms[i].x < arms[i - 1].x) return false;
    if (arms[i].report.replan_ratio > arms[i - 1].report.replan_ratio) return false;
  }
  return true;
}

inline std::vector<PlotRow> criterion_plot(const std::vector<ArmResult>& arms, const std::string& series) {
  std::vector<PlotRow> rows;
  for (const auto& a : arms) rows.push_back({a.report.replan_ratio, a.report.score_mean, series});
  return rows;
}

inline std::string selection_label(int m, int M) {
  if (m == M) return "TDP_All";
  if (m == 1) return "TDP_Best";
  return m == 8 ? "TDP" : "TDP_m" + std::to_string(m);
}

/// Candidate-selection arms: m survivors are kept after each refinement.
inline std::vector<ArmResult> ablate_candidate_selection(const AblationSetup& s, const std::vector<int>& m_values) {
  std::vector<ArmResult> arms;
  for (int m : m_values) {
    PlannerConfig cfg = s.base;
    cfg.top_m = m;
    arms.push_back(run_arm(s, cfg, selection_label(m, cfg.candidates), m));
  }
  return arms;
}

}  // namespace tdp
