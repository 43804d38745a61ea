#pragma once

#include "planlab/evaluator.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace planlab {

struct NamedPlanning {
  std::string name;
  PlanningMetrics metrics;
};

struct NamedSafety {
  std::string name;
  OodResult result;
};

struct ReportInputs {
  std::vector<NamedPlanning> planning;  // one row per model
  // Row names in `planning` to compare; the delta is candidate vs baseline.
  std::optional<std::pair<std::string, std::string>> delta;
  std::vector<NamedSafety> ood;
  std::vector<WeightScheme> schemes = WeightScheme::presets();
  std::vector<NamedPlanning> ratio_ablation;      // labelled by easy:hard ratio
  std::vector<NamedPlanning> reasoning_ablation;  // with / without reasoning
  std::vector<std::string> gaps;                  // inputs that were missing
};

// Signed relative change, e.g. "-12.1%"; "n/a" when the baseline is zero.
std::string format_delta(double baseline, double candidate);

nlohmann::json planning_to_json(const PlanningMetrics& m);
PlanningMetrics planning_from_json(const nlohmann::json& j);
nlohmann::json ood_to_json(const OodResult& r, bool per_scene = false);
OodResult ood_from_json(const nlohmann::json& j);

// The JSON document is the single source; the markdown is rendered from it.
nlohmann::json build_report(const ReportInputs& inputs);
std::string render_markdown(const nlohmann::json& report);

}  // namespace planlab
