#pragma once

#include "planlab/datakit.hpp"
#include "planlab/evaluator.hpp"
#include "planlab/policy.hpp"
#include "planlab/rewards.hpp"
#include "planlab/trainer.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace planlab {

struct ModelConfig {
  int grid_size = 32;
  int hidden = 64;
  int max_len = 40;
};

struct ExperimentConfig {
  std::string preset = "benchmark";
  std::filesystem::path workdir = "planlab-run";
  std::uint64_t seed = 0;
  std::string variant = "default";
  bool reasoning = true;  // reasoning in SFT targets and required by the format reward
  int threads = 1;
  ModelConfig model;
  SyntheticConfig data;
  SplitPlan split;
  ValidationPlan validation;
  SftConfig sft;
  RftConfig rft;
  SamplingConfig sampling;
  CoordinateMode reward_mode = CoordinateMode::Normalized;
  bool eval_greedy = true;
  std::vector<Ratio> ablation_ratios{{9, 1}, {7, 3}, {6, 4}};

  // Pushes the master seed, waypoint count and reasoning switch into the
  // per-module configs and validates them all.
  void resolve();

  Vocab vocab() const { return Vocab(model.grid_size, data.n_waypoints); }
  PolicyShape shape() const;
  RewardOptions reward_options() const;
};

// Hyperparameters as published for the full-scale model.
ExperimentConfig paper_preset();
// Desk-scale settings: same structure, learning rates and epochs sized for
// the small policy and plain CPU budget.
ExperimentConfig benchmark_preset();
ExperimentConfig preset_by_name(std::string_view name);

nlohmann::json config_to_json(const ExperimentConfig& cfg);
// Applies the keys present in `j` on top of `base`. Unknown keys are errors.
ExperimentConfig config_from_json(const nlohmann::json& j, ExperimentConfig base);

std::string_view to_string(CoordinateMode m);
std::string_view to_string(KlMode m);

}  // namespace planlab
