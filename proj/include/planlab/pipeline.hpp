#pragma once

#include "planlab/config.hpp"

#include <json.hpp>

#include <filesystem>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace planlab {

enum class ErrorCategory { Config, Io, Data, MissingPrerequisite, Infeasible, Training, Internal };

std::string_view to_string(ErrorCategory c);
int exit_code(ErrorCategory c);

class PipelineError : public std::runtime_error {
 public:
  PipelineError(ErrorCategory category, const std::string& message)
      : std::runtime_error(message), category_(category) {}
  ErrorCategory category() const { return category_; }

 private:
  ErrorCategory category_;
};

// Workdir layout shared by all commands.
struct RunPaths {
  std::filesystem::path root;

  std::filesystem::path data_dir() const { return root / "data"; }
  std::filesystem::path samples() const { return data_dir() / "samples.jsonl"; }
  std::filesystem::path val_dense() const { return data_dir() / "val_dense.jsonl"; }
  std::filesystem::path val_standard() const { return data_dir() / "val_standard.jsonl"; }
  std::filesystem::path ood() const { return data_dir() / "ood.jsonl"; }
  std::filesystem::path split_dir() const { return root / "split"; }
  std::filesystem::path tagged() const { return split_dir() / "tagged.jsonl"; }
  std::filesystem::path sft_set() const { return split_dir() / "sft.jsonl"; }
  std::filesystem::path rft_set() const { return split_dir() / "rft.jsonl"; }
  std::filesystem::path val_easy() const { return split_dir() / "val_easy.jsonl"; }
  std::filesystem::path val_hard() const { return split_dir() / "val_hard.jsonl"; }
  std::filesystem::path checkpoints(const std::string& variant) const {
    return root / "checkpoints" / variant;
  }
  std::filesystem::path eval_dir(const std::string& variant) const {
    return root / "eval" / variant;
  }
  std::filesystem::path ood_dir(const std::string& variant) const {
    return root / "ood" / variant;
  }
  std::filesystem::path report_dir() const { return root / "report"; }
};

// Stage name of an ablation checkpoint, e.g. "rft_9-1".
std::string ratio_stage(const Ratio& r);

struct CommandContext {
  ExperimentConfig config;
  std::ostream* log = nullptr;  // progress lines; may be null
};

// Each command returns a summary that is also printed by the CLI.
nlohmann::json cmd_generate(const CommandContext& ctx);
nlohmann::json cmd_split(const CommandContext& ctx);
nlohmann::json cmd_sft(const CommandContext& ctx);
// Empty `ratios` trains on the default RFT split; otherwise one run per
// easy:hard ratio, each starting from the same SFT checkpoint.
nlohmann::json cmd_rft(const CommandContext& ctx, const std::vector<Ratio>& ratios = {});
nlohmann::json cmd_eval(const CommandContext& ctx);
nlohmann::json cmd_ood(const CommandContext& ctx);
nlohmann::json cmd_report(const CommandContext& ctx);

}  // namespace planlab
