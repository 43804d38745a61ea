#pragma once

#include "planlab/datakit.hpp"
#include "planlab/geometry.hpp"
#include "planlab/parsing.hpp"
#include "planlab/policy.hpp"

#include <Eigen/Core>

#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace planlab {

struct Query {
  Eigen::VectorXd context;
  Resolution resolution;
};

// Anything that maps scene contexts to pixel trajectories. nullopt marks a
// response that could not be decoded.
class Predictor {
 public:
  virtual ~Predictor() = default;
  virtual std::vector<std::optional<Trajectory>> predict(std::span<const Query> queries) const = 0;
};

class FunctionPredictor : public Predictor {
 public:
  using Fn = std::function<std::optional<Trajectory>(const Query&)>;
  explicit FunctionPredictor(Fn fn) : fn_(std::move(fn)) {}
  std::vector<std::optional<Trajectory>> predict(std::span<const Query> queries) const override;

 private:
  Fn fn_;
};

struct DecodeOptions {
  bool greedy = true;
  SamplingConfig sampling;  // used when greedy is false
  ParseOptions parse;
};

// Decodes the policy, renders the tokens and parses them like any other
// response text.
class PolicyPredictor : public Predictor {
 public:
  PolicyPredictor(const PolicyParams& params, const Vocab& vocab, DecodeOptions options = {});
  std::vector<std::optional<Trajectory>> predict(std::span<const Query> queries) const override;

 private:
  const PolicyParams& params_;
  Vocab vocab_;
  DecodeOptions options_;
};

struct SubsetMetrics {
  double ade_pct = 0.0;  // x by width, y by height, times 100
  double fde_pct = 0.0;
  std::size_t samples = 0;
  std::size_t decode_failures = 0;

  double coverage() const {
    return samples ? 1.0 - static_cast<double>(decode_failures) / static_cast<double>(samples)
                   : 0.0;
  }
};

// Keyed by split tag name ("val_easy", "val_hard", ...).
using PlanningMetrics = std::map<std::string, SubsetMetrics>;

PlanningMetrics eval_planning(const Predictor& predictor, std::span<const Sample> samples);

struct SafetyMetrics {
  double fail_rate = 0.0;        // scenes with a hit / scenes
  double collision_count = 0.0;  // boxes hit / scenes
  double penetration = 0.0;      // pixels inside boxes / scenes
};

struct SceneOutcome {
  std::string id;
  int boxes_hit = 0;
  double penetration = 0.0;
  bool decode_failed = false;
};

struct OodResult {
  SafetyMetrics metrics;
  std::size_t scenes = 0;
  std::size_t boxes = 0;
  std::size_t decode_failures = 0;
  std::vector<SceneOutcome> per_scene;
};

// Undecodable responses count as failed scenes with no box or penetration
// contribution.
OodResult eval_ood(const Predictor& predictor, std::span<const OodScene> scenes);

struct WeightScheme {
  std::string name;
  double w_fail = 0.0;
  double w_collision = 0.0;
  double w_penetration = 0.0;

  static WeightScheme balanced() { return {"Balanced", 0.4, 0.3, 0.3}; }
  static WeightScheme safety_focused() { return {"Safety-Focused", 0.3, 0.2, 0.5}; }
  static WeightScheme performance_focused() { return {"Performance-Focused", 0.5, 0.3, 0.2}; }
  static WeightScheme equal() { return {"Equal", 0.33, 0.33, 0.34}; }
  static std::vector<WeightScheme> presets();
};

// scores[model][scheme]. Each metric is min-max normalized across models;
// a metric on which every model ties contributes its full weight.
std::vector<std::vector<double>> safety_scores(std::span<const SafetyMetrics> models,
                                               std::span<const WeightScheme> schemes);

}  // namespace planlab
