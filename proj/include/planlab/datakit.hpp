#pragma once

#include "planlab/geometry.hpp"

#include <Eigen/Core>
#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace planlab {

enum class SplitTag { Unassigned, SftStraight, SftTurn, RftStraight, RftTurn, ValEasy, ValHard };

std::string_view to_string(SplitTag tag);
SplitTag split_tag_from_string(std::string_view s);  // throws std::invalid_argument
bool is_sft(SplitTag tag);
bool is_rft(SplitTag tag);

struct Sample {
  std::string id;
  Eigen::VectorXd context;
  Resolution resolution;
  std::string reasoning;
  Trajectory trajectory;  // pixels
  SplitTag tag = SplitTag::Unassigned;
  std::string image;  // optional reference, carried through unchanged
};

struct OodScene {
  std::string id;
  Eigen::VectorXd context;
  Resolution resolution;
  std::vector<AABox<double>> boxes;
};

// Population variance of the x coordinates.
template <typename Derived>
typename Derived::Scalar x_variance(const Eigen::MatrixBase<Derived>& traj) {
  if (traj.cols() < 1) throw std::invalid_argument("x_variance of an empty trajectory");
  const auto x = traj.row(0).array();
  return (x - x.mean()).square().mean();
}

// "a:b" proportions.
struct Ratio {
  double first = 1.0;
  double second = 1.0;

  double first_share() const { return first / (first + second); }
  static Ratio parse(std::string_view text);  // throws std::invalid_argument
  std::string str() const;
};

struct SplitPlan {
  Ratio sft_rft{4, 1};
  Ratio sft_straight_turn{6, 4};
  Ratio rft_straight_turn{6, 4};
  // Absolute split sizes; when unset the whole dataset is divided by sft_rft.
  std::optional<std::size_t> sft_count;
  std::optional<std::size_t> rft_count;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SplitCounts {
  std::size_t sft_turn = 0, sft_straight = 0, rft_turn = 0, rft_straight = 0;
  std::size_t sft() const { return sft_turn + sft_straight; }
  std::size_t rft() const { return rft_turn + rft_straight; }
};

SplitCounts plan_counts(std::size_t dataset_size, const SplitPlan& plan);

// Sorts by x-variance (descending), tags the top sft_turn + rft_turn as
// turning (RFT-turn first, then SFT-turn) and the following samples as
// straight (SFT-straight first, then RFT-straight). Leftovers stay Unassigned.
// Returns the dataset in its original order.
std::vector<Sample> split_sft_rft(std::vector<Sample> dataset, const SplitPlan& plan);

std::map<SplitTag, std::size_t> tag_counts(std::span<const Sample> samples);

struct ValidationSets {
  std::vector<Sample> easy;
  std::vector<Sample> hard;
};

struct ValidationPlan {
  std::size_t easy_size = 1000;
  std::size_t hard_top_count = 700;
  std::size_t hard_bottom_count = 300;
  double top_fraction = 0.7;
  double bottom_fraction = 0.1;
  std::uint64_t seed = 0;
};

// Candidates are dense minus standard (by id), sorted by x-variance
// descending. Easy is the median-centered slice; hard draws from the top and
// bottom fractions of the sorted list.
ValidationSets build_validation_sets(std::span<const Sample> dense,
                                     std::span<const Sample> standard,
                                     const ValidationPlan& plan = {});

struct SyntheticConfig {
  std::size_t samples = 5430;
  std::size_t val_dense = 3600;
  std::size_t val_standard_overlap = 400;
  std::size_t val_standard_extra = 100;
  std::size_t ood_scenes = 200;
  Resolution resolution{640.0, 480.0};
  int n_waypoints = 20;
  int context_dim = 16;
  double turn_fraction = 0.4;
  double straight_curvature = 0.03;
  double turn_curvature_min = 0.2;
  double turn_curvature_max = 1.0;
  double noise_px = 3.0;
  // x-variance (px^2) separating straight from turning paths.
  double turn_variance_threshold = 30.0;
  int max_boxes = 3;
  double on_path_fraction = 0.5;

  void validate() const;
};

// Latent scene description the generator renders from.
struct SceneParams {
  double curvature = 0.0;  // signed, negative bends left
  double offset = 0.0;     // [-1, 1], lateral start offset
  double length = 0.5;     // [0, 1], forward extent
  int hazard = 0;          // index into the hazard words
  int side = 1;            // -1 left, +1 right
};

Eigen::VectorXd encode_context(const SceneParams& scene, std::span<const double> nuisance,
                               int context_dim);
Trajectory nominal_trajectory(const SceneParams& scene, Resolution res, int n_waypoints);
std::string describe_scene(const SceneParams& scene);

struct SyntheticCorpus {
  std::vector<Sample> samples;
  std::vector<Sample> val_dense;
  std::vector<Sample> val_standard;
  std::vector<OodScene> ood;
};

SyntheticCorpus generate_synthetic(const SyntheticConfig& config, std::uint64_t seed);

// Line-precise data error: "<path>:<line>: <field>: <message>".
class DataError : public std::runtime_error {
 public:
  DataError(const std::string& source, std::size_t line, const std::string& field,
            const std::string& message);
  std::size_t line() const { return line_; }
  const std::string& field() const { return field_; }

 private:
  std::size_t line_;
  std::string field_;
};

struct LoadOptions {
  // Required waypoint count; 0 accepts any length.
  std::size_t expected_n = 20;
};

nlohmann::json sample_to_json(const Sample& s);
Sample sample_from_json(const nlohmann::json& j, const LoadOptions& options = {});
// Instruction-following record: image reference, prompt and the serialized
// reasoning + answer pair, plus the context and tag.
nlohmann::json to_instruction_record(const Sample& s);
nlohmann::json scene_to_json(const OodScene& s);
OodScene scene_from_json(const nlohmann::json& j);

std::string instruction_prompt(int n_waypoints);

// JSONL, one record per line. Files starting with '[' are read as a JSON
// array for compatibility. Records may be native samples or instruction
// records.
std::vector<Sample> load_samples(const std::filesystem::path& path,
                                 const LoadOptions& options = {});
void save_samples(std::span<const Sample> samples, const std::filesystem::path& path);
void save_instruction_samples(std::span<const Sample> samples, const std::filesystem::path& path);
std::vector<OodScene> load_scenes(const std::filesystem::path& path);
void save_scenes(std::span<const OodScene> scenes, const std::filesystem::path& path);

}  // namespace planlab
