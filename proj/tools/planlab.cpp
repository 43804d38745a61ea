#include "planlab/pipeline.hpp"

#include <CLI11.hpp>
#include <Eigen/Core>

#include <algorithm>
#include <fstream>
#include <iostream>

namespace {

using planlab::ErrorCategory;
using planlab::PipelineError;

// "a.b.c=value" into a nested JSON object; the value is JSON if it parses,
// otherwise a string.
void apply_setting(nlohmann::json& doc, const std::string& setting) {
  const auto eq = setting.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw PipelineError(ErrorCategory::Config, "--set expects key=value, got '" + setting + "'");
  }
  const std::string key = setting.substr(0, eq);
  const std::string raw = setting.substr(eq + 1);
  nlohmann::json value = nlohmann::json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;
  nlohmann::json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot - start);
    if (dot == std::string::npos) {
      (*node)[part] = value;
      break;
    }
    node = &(*node)[part];
    start = dot + 1;
  }
}

nlohmann::json read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw PipelineError(ErrorCategory::Config, "cannot read config file " + path);
  try {
    auto doc = nlohmann::json::parse(in);
    if (!doc.contains("seed")) {
      throw PipelineError(ErrorCategory::Config, path + ": the config file must set \"seed\"");
    }
    return doc;
  } catch (const nlohmann::json::parse_error& e) {
    throw PipelineError(ErrorCategory::Config, path + ": " + e.what());
  }
}

// stderr carries exactly one line per error.
std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

void report_error(ErrorCategory c, const std::string& message) {
  std::cerr << "error: " << planlab::to_string(c) << ": " << one_line(message) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"planlab: two-phase trajectory planning pipeline (SFT then GRPO)"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::string preset;
  std::string workdir;
  std::string variant;
  std::uint64_t seed = 0;
  int threads = 1;
  bool no_reasoning = false;
  std::vector<std::string> settings;

  app.add_option("-c,--config", config_path, "JSON experiment config")
      ->envname("PLANLAB_CONFIG");
  app.add_option("--preset", preset, "base settings: benchmark (default) or paper");
  app.add_option("-w,--workdir", workdir, "run directory");
  app.add_option("--seed", seed, "master seed");
  app.add_option("--variant", variant, "checkpoint variant name");
  app.add_flag("--no-reasoning", no_reasoning,
               "drop reasoning from SFT targets and from the format reward");
  app.add_option("--threads", threads, "worker thread cap")->check(CLI::PositiveNumber);
  app.add_option("--set", settings, "override a config key, e.g. --set rft.learning_rate=0.1");

  std::size_t count = 0;
  auto* generate = app.add_subcommand("generate", "write the synthetic dataset and OOD scenes");
  generate->add_option("--count", count, "number of training samples");
  auto* split = app.add_subcommand("split", "SFT/RFT split and easy/hard validation sets");
  auto* sft = app.add_subcommand("sft", "supervised phase");
  std::string ratios_text;
  auto* rft = app.add_subcommand("rft", "GRPO phase starting from the SFT checkpoint");
  rft->add_option("--ratios", ratios_text,
                  "comma-separated easy:hard ratios for the RFT data, e.g. 9:1,7:3,6:4");
  auto* eval = app.add_subcommand("eval", "in-domain ADE/FDE on the validation sets");
  auto* ood = app.add_subcommand("ood", "collision metrics on OOD scenes");
  auto* report = app.add_subcommand("report", "markdown and JSON summary of a run");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    report_error(ErrorCategory::Config, e.what());
    return planlab::exit_code(ErrorCategory::Config);
  }

  try {
    nlohmann::json overrides = nlohmann::json::object();
    if (!config_path.empty()) overrides = read_config_file(config_path);
    if (!preset.empty()) overrides["preset"] = preset;
    if (!workdir.empty()) overrides["workdir"] = workdir;
    if (app.count("--seed")) overrides["seed"] = seed;
    if (!variant.empty()) overrides["variant"] = variant;
    if (app.count("--threads")) overrides["threads"] = threads;
    if (no_reasoning) {
      overrides["reasoning"] = false;
      if (variant.empty() && !overrides.contains("variant")) overrides["variant"] = "no-reasoning";
    }
    if (generate->parsed() && generate->count("--count")) overrides["data"]["samples"] = count;
    for (const auto& s : settings) apply_setting(overrides, s);

    planlab::CommandContext ctx;
    try {
      ctx.config = planlab::config_from_json(overrides, planlab::benchmark_preset());
      ctx.config.resolve();
    } catch (const std::exception& e) {
      throw PipelineError(ErrorCategory::Config, e.what());
    }
    Eigen::setNbThreads(ctx.config.threads);
    ctx.log = &std::cerr;

    nlohmann::json summary;
    if (generate->parsed()) summary = planlab::cmd_generate(ctx);
    if (split->parsed()) summary = planlab::cmd_split(ctx);
    if (sft->parsed()) summary = planlab::cmd_sft(ctx);
    if (rft->parsed()) {
      std::vector<planlab::Ratio> ratios;
      std::size_t start = 0;
      while (start < ratios_text.size()) {
        const auto comma = ratios_text.find(',', start);
        const auto part = ratios_text.substr(start, comma - start);
        try {
          ratios.push_back(planlab::Ratio::parse(part));
        } catch (const std::invalid_argument& e) {
          throw PipelineError(ErrorCategory::Config, e.what());
        }
        if (comma == std::string::npos) break;
        start = comma + 1;
      }
      summary = planlab::cmd_rft(ctx, ratios);
    }
    if (eval->parsed()) summary = planlab::cmd_eval(ctx);
    if (ood->parsed()) summary = planlab::cmd_ood(ctx);
    if (report->parsed()) {
      planlab::cmd_report(ctx);
      summary = {{"report", (planlab::RunPaths{ctx.config.workdir}.report_dir()).string()}};
    }
    std::cout << summary.dump(2) << '\n';
    return 0;
  } catch (const PipelineError& e) {
    report_error(e.category(), e.what());
    return planlab::exit_code(e.category());
  } catch (const std::invalid_argument& e) {
    report_error(ErrorCategory::Config, e.what());
    return planlab::exit_code(ErrorCategory::Config);
  } catch (const std::exception& e) {
    report_error(ErrorCategory::Internal, e.what());
    return planlab::exit_code(ErrorCategory::Internal);
  }
}
