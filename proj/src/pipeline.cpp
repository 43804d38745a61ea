#include "planlab/pipeline.hpp"

#include "planlab/checkpoint.hpp"
#include "planlab/report.hpp"

#include <algorithm>
#include <fstream>
#include <set>

namespace planlab {

namespace fs = std::filesystem;

std::string_view to_string(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::Config: return "config";
    case ErrorCategory::Io: return "io";
    case ErrorCategory::Data: return "data";
    case ErrorCategory::MissingPrerequisite: return "missing-prerequisite";
    case ErrorCategory::Infeasible: return "infeasible";
    case ErrorCategory::Training: return "training";
    case ErrorCategory::Internal: return "internal";
  }
  return "internal";
}

int exit_code(ErrorCategory c) { return 2 + static_cast<int>(c); }

std::string ratio_stage(const Ratio& r) {
  std::string s = "rft_" + r.str();
  std::replace(s.begin(), s.end(), ':', '-');
  return s;
}

namespace {

void say(const CommandContext& ctx, const std::string& line) {
  if (ctx.log) *ctx.log << line << std::endl;
}

void require_file(const fs::path& path, std::string_view command) {
  if (!fs::exists(path)) {
    throw PipelineError(ErrorCategory::MissingPrerequisite,
                        "missing " + path.string() + "; run `planlab " + std::string(command) +
                            "` first");
  }
}

void write_json(const fs::path& path, const nlohmann::json& doc) {
  try {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
  } catch (const fs::filesystem_error& e) {
    throw PipelineError(ErrorCategory::Io, e.what());
  }
  std::ofstream out(path);
  if (!out) throw PipelineError(ErrorCategory::Io, "cannot write " + path.string());
  out << doc.dump(2) << '\n';
  if (!out) throw PipelineError(ErrorCategory::Io, "failed writing " + path.string());
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw PipelineError(ErrorCategory::Io, "cannot read " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw PipelineError(ErrorCategory::Data, path.string() + ": " + e.what());
  }
}

// Opens an append-only metrics log, truncating any previous run.
class MetricsLog {
 public:
  explicit MetricsLog(const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    out_.open(path, std::ios::trunc);
    if (!out_) throw PipelineError(ErrorCategory::Io, "cannot write " + path.string());
  }
  void write(const nlohmann::json& record) { out_ << record.dump() << '\n'; }

 private:
  std::ofstream out_;
};

template <typename Fn>
auto guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const PipelineError&) {
    throw;
  } catch (const DataError& e) {
    throw PipelineError(ErrorCategory::Data, e.what());
  } catch (const TrainingError& e) {
    throw PipelineError(ErrorCategory::Training,
                        std::string(e.what()) + "; offending group: " + e.dump().dump());
  } catch (const fs::filesystem_error& e) {
    throw PipelineError(ErrorCategory::Io, e.what());
  }
}

std::vector<Sample> load(const fs::path& path, const ExperimentConfig& cfg,
                         std::string_view producer) {
  require_file(path, producer);
  LoadOptions opts;
  opts.expected_n = static_cast<std::size_t>(cfg.data.n_waypoints);
  return guarded([&] { return load_samples(path, opts); });
}

nlohmann::json manifest(std::string_view command, const ExperimentConfig& cfg) {
  return {{"command", command}, {"config", config_to_json(cfg)}};
}

nlohmann::json counts_json(std::span<const Sample> samples) {
  nlohmann::json out = nlohmann::json::object();
  for (const auto& [tag, n] : tag_counts(samples)) out[std::string(to_string(tag))] = n;
  return out;
}

struct StagedCheckpoint {
  std::string stage;
  fs::path path;
};

// sft first, then rft, then ablation checkpoints in name order.
std::vector<StagedCheckpoint> find_checkpoints(const fs::path& dir) {
  std::vector<StagedCheckpoint> out;
  if (!fs::is_directory(dir)) return out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const auto p = entry.path();
    if (p.extension() != ".json") continue;
    const std::string stage = p.stem().string();
    if (stage == "sft" || stage == "rft" || stage.starts_with("rft_")) out.push_back({stage, p});
  }
  auto rank = [](const std::string& s) { return s == "sft" ? 0 : (s == "rft" ? 1 : 2); };
  std::sort(out.begin(), out.end(), [&](const auto& a, const auto& b) {
    if (rank(a.stage) != rank(b.stage)) return rank(a.stage) < rank(b.stage);
    return a.stage < b.stage;
  });
  return out;
}

Checkpoint load_policy(const fs::path& path, const ExperimentConfig& cfg) {
  Checkpoint ck = guarded([&] {
    try {
      return load_checkpoint(path);
    } catch (const nlohmann::json::exception& e) {
      throw PipelineError(ErrorCategory::Data, path.string() + ": " + e.what());
    } catch (const std::runtime_error& e) {
      throw PipelineError(ErrorCategory::Data, path.string() + ": " + e.what());
    }
  });
  if (!(ck.params.shape() == cfg.shape())) {
    throw PipelineError(ErrorCategory::Config,
                        path.string() + " was trained with a different model shape");
  }
  return ck;
}

}  // namespace

nlohmann::json cmd_generate(const CommandContext& ctx) {
  const auto& cfg = ctx.config;
  const RunPaths paths{cfg.workdir};
  const SyntheticCorpus corpus = generate_synthetic(cfg.data, cfg.seed);
  guarded([&] {
    save_samples(corpus.samples, paths.samples());
    save_samples(corpus.val_dense, paths.val_dense());
    save_samples(corpus.val_standard, paths.val_standard());
    save_scenes(corpus.ood, paths.ood());
    return 0;
  });
  nlohmann::json summary = {{"samples", corpus.samples.size()},
                            {"val_dense", corpus.val_dense.size()},
                            {"val_standard", corpus.val_standard.size()},
                            {"ood_scenes", corpus.ood.size()},
                            {"seed", cfg.seed}};
  auto m = manifest("generate", cfg);
  m["counts"] = summary;
  write_json(paths.data_dir() / "manifest.json", m);
  say(ctx, "generate: " + std::to_string(corpus.samples.size()) + " samples, " +
               std::to_string(corpus.ood.size()) + " OOD scenes in " +
               paths.data_dir().string());
  return summary;
}

nlohmann::json cmd_split(const CommandContext& ctx) {
  const auto& cfg = ctx.config;
  const RunPaths paths{cfg.workdir};
  auto samples = load(paths.samples(), cfg, "generate");
  const auto dense = load(paths.val_dense(), cfg, "generate");
  const auto standard = load(paths.val_standard(), cfg, "generate");

  std::vector<Sample> tagged;
  ValidationSets val;
  try {
    tagged = split_sft_rft(std::move(samples), cfg.split);
    val = build_validation_sets(dense, standard, cfg.validation);
  } catch (const std::invalid_argument& e) {
    throw PipelineError(ErrorCategory::Infeasible, e.what());
  }
  std::vector<Sample> sft, rft;
  for (const auto& s : tagged) {
    if (is_sft(s.tag)) sft.push_back(s);
    if (is_rft(s.tag)) rft.push_back(s);
  }
  guarded([&] {
    save_samples(tagged, paths.tagged());
    save_instruction_samples(sft, paths.sft_set());
    save_instruction_samples(rft, paths.rft_set());
    save_samples(val.easy, paths.val_easy());
    save_samples(val.hard, paths.val_hard());
    return 0;
  });
  nlohmann::json summary = {{"sft", sft.size()},
                            {"rft", rft.size()},
                            {"tags", counts_json(tagged)},
                            {"val_easy", val.easy.size()},
                            {"val_hard", val.hard.size()}};
  auto m = manifest("split", cfg);
  m["counts"] = summary;
  write_json(paths.split_dir() / "manifest.json", m);
  say(ctx, "split: " + std::to_string(sft.size()) + " SFT / " + std::to_string(rft.size()) +
               " RFT, validation " + std::to_string(val.easy.size()) + " easy / " +
               std::to_string(val.hard.size()) + " hard");
  return summary;
}

nlohmann::json cmd_sft(const CommandContext& ctx) {
  const auto& cfg = ctx.config;
  const RunPaths paths{cfg.workdir};
  const auto data = load(paths.sft_set(), cfg, "split");
  const Vocab vocab = cfg.vocab();
  PolicyParams params = PolicyParams::random(cfg.shape(), cfg.seed);
  const fs::path dir = paths.checkpoints(cfg.variant);
  MetricsLog metrics(dir / "sft_metrics.jsonl");
  const std::size_t per_epoch = (data.size() + cfg.sft.batch_size - 1) / cfg.sft.batch_size;
  const SftResult r = guarded([&] {
    return train_sft(params, data, vocab, cfg.sft, [&](const nlohmann::json& rec) {
      metrics.write(rec);
      const auto step = rec["step"].get<std::size_t>();
      if (per_epoch > 0 && (step + 1) % per_epoch == 0) {
        say(ctx, "sft: epoch " + std::to_string((step + 1) / per_epoch) + "/" +
                     std::to_string(cfg.sft.epochs) + " loss " + rec["loss"].dump());
      }
    });
  });
  auto meta = manifest("sft", cfg);
  meta["stage"] = "sft";
  meta["skipped"] = r.skipped;
  guarded([&] {
    save_checkpoint(dir / "sft.json", params, vocab, meta);
    return 0;
  });
  return {{"checkpoint", (dir / "sft.json").string()},
          {"steps", r.losses.size()},
          {"final_loss", r.losses.empty() ? nlohmann::json() : nlohmann::json(r.losses.back())},
          {"skipped", r.skipped.size()}};
}

nlohmann::json cmd_rft(const CommandContext& ctx, const std::vector<Ratio>& ratios) {
  const auto& cfg = ctx.config;
  const RunPaths paths{cfg.workdir};
  const fs::path dir = paths.checkpoints(cfg.variant);
  if (!fs::exists(dir / "sft.json")) {
    throw PipelineError(ErrorCategory::MissingPrerequisite,
                        "missing SFT checkpoint " + (dir / "sft.json").string() +
                            "; run `planlab sft` first");
  }
  const Checkpoint sft = load_policy(dir / "sft.json", cfg);
  const Vocab vocab = cfg.vocab();
  const RewardFn reward = make_reward_fn(vocab, cfg.reward_options());

  struct Job {
    std::string stage;
    std::vector<Sample> prompts;
  };
  std::vector<Job> jobs;
  if (ratios.empty()) {
    jobs.push_back({"rft", load(paths.rft_set(), cfg, "split")});
  } else {
    const auto samples = load(paths.samples(), cfg, "generate");
    for (const auto& ratio : ratios) {
      SplitPlan plan = cfg.split;
      plan.rft_straight_turn = ratio;
      std::vector<Sample> tagged;
      try {
        tagged = split_sft_rft(samples, plan);
      } catch (const std::invalid_argument& e) {
        throw PipelineError(ErrorCategory::Infeasible, e.what());
      }
      Job job{ratio_stage(ratio), {}};
      for (auto& s : tagged) {
        if (is_rft(s.tag)) job.prompts.push_back(std::move(s));
      }
      jobs.push_back(std::move(job));
    }
  }

  nlohmann::json summary = nlohmann::json::object();
  for (const auto& job : jobs) {
    MetricsLog metrics(dir / (job.stage + "_metrics.jsonl"));
    const std::size_t per_batch =
        (cfg.rft.batch_size + cfg.rft.mini_batch - 1) / cfg.rft.mini_batch;
    const RftResult r = guarded([&] {
        return train_rft(sft.params, job.prompts, vocab, cfg.rft, cfg.sampling, reward,
                         [&](const nlohmann::json& rec) {
                           metrics.write(rec);
                           const auto step = rec["step"].get<std::size_t>();
                           if ((step + 1) % (4 * per_batch) == 0) {
                             say(ctx, job.stage + ": step " + std::to_string(step + 1) +
                                          " reward " + rec["mean_reward"].dump() + " kl " +
                                          rec["mean_kl"].dump());
                           }
                         });
    });
    auto meta = manifest("rft", cfg);
    meta["stage"] = job.stage;
    meta["prompts"] = job.prompts.size();
    guarded([&] {
      save_checkpoint(dir / (job.stage + ".json"), r.params, vocab, meta);
      return 0;
    });
    double first = 0.0, last = 0.0;
    if (!r.steps.empty()) {
      first = r.steps.front().mean_reward;
      last = r.steps.back().mean_reward;
    }
    summary[job.stage] = {{"checkpoint", (dir / (job.stage + ".json")).string()},
                          {"prompts", job.prompts.size()},
                          {"steps", r.steps.size()},
                          {"first_reward", first},
                          {"last_reward", last}};
  }
  return summary;
}

nlohmann::json cmd_eval(const CommandContext& ctx) {
  const auto& cfg = ctx.config;
  const RunPaths paths{cfg.workdir};
  const auto checkpoints = find_checkpoints(paths.checkpoints(cfg.variant));
  if (checkpoints.empty()) {
    throw PipelineError(ErrorCategory::MissingPrerequisite,
                        "no checkpoints in " + paths.checkpoints(cfg.variant).string() +
                            "; run `planlab sft` first");
  }
  auto samples = load(paths.val_easy(), cfg, "split");
  const auto hard = load(paths.val_hard(), cfg, "split");
  samples.insert(samples.end(), hard.begin(), hard.end());

  DecodeOptions decode;
  decode.greedy = cfg.eval_greedy;
  decode.sampling = cfg.sampling;
  decode.parse.expected_n = static_cast<std::size_t>(cfg.data.n_waypoints);
  nlohmann::json summary = nlohmann::json::object();
  for (const auto& ck : checkpoints) {
    const Checkpoint policy = load_policy(ck.path, cfg);
    const PolicyPredictor predictor(policy.params, policy.vocab, decode);
    const PlanningMetrics metrics = eval_planning(predictor, samples);
    nlohmann::json doc = manifest("eval", cfg);
    doc["stage"] = ck.stage;
    doc["variant"] = cfg.variant;
    doc["reasoning"] = cfg.reasoning;
    doc["planning"] = planning_to_json(metrics);
    write_json(paths.eval_dir(cfg.variant) / (ck.stage + ".json"), doc);
    summary[ck.stage] = doc["planning"];
    for (const auto& [tag, m] : metrics) {
      char line[160];
      std::snprintf(line, sizeof line, "eval: %s %s ADE %.3f%% FDE %.3f%% coverage %.1f%%",
                    ck.stage.c_str(), tag.c_str(), m.ade_pct, m.fde_pct, 100.0 * m.coverage());
      say(ctx, line);
    }
  }
  return summary;
}

nlohmann::json cmd_ood(const CommandContext& ctx) {
  const auto& cfg = ctx.config;
  const RunPaths paths{cfg.workdir};
  const auto checkpoints = find_checkpoints(paths.checkpoints(cfg.variant));
  if (checkpoints.empty()) {
    throw PipelineError(ErrorCategory::MissingPrerequisite,
                        "no checkpoints in " + paths.checkpoints(cfg.variant).string() +
                            "; run `planlab sft` first");
  }
  require_file(paths.ood(), "generate");
  const auto scenes = guarded([&] { return load_scenes(paths.ood()); });
  if (scenes.empty()) {
    throw PipelineError(ErrorCategory::Data, paths.ood().string() + " holds no scenes");
  }
  DecodeOptions decode;
  decode.greedy = cfg.eval_greedy;
  decode.sampling = cfg.sampling;
  decode.parse.expected_n = static_cast<std::size_t>(cfg.data.n_waypoints);
  nlohmann::json summary = nlohmann::json::object();
  for (const auto& ck : checkpoints) {
    const Checkpoint policy = load_policy(ck.path, cfg);
    const PolicyPredictor predictor(policy.params, policy.vocab, decode);
    const OodResult r = eval_ood(predictor, scenes);
    nlohmann::json doc = manifest("ood", cfg);
    doc["stage"] = ck.stage;
    doc["variant"] = cfg.variant;
    doc["ood"] = ood_to_json(r, true);
    write_json(paths.ood_dir(cfg.variant) / (ck.stage + ".json"), doc);
    summary[ck.stage] = ood_to_json(r);
    char line[160];
    std::snprintf(line, sizeof line, "ood: %s F %.3f C %.3f P %.2f decode failures %zu",
                  ck.stage.c_str(), r.metrics.fail_rate, r.metrics.collision_count,
                  r.metrics.penetration, r.decode_failures);
    say(ctx, line);
  }
  return summary;
}

nlohmann::json cmd_report(const CommandContext& ctx) {
  const auto& cfg = ctx.config;
  const RunPaths paths{cfg.workdir};
  ReportInputs in;

  auto variants_in = [&](const fs::path& dir) {
    std::vector<std::string> out;
    if (fs::is_directory(dir)) {
      for (const auto& e : fs::directory_iterator(dir)) {
        if (e.is_directory()) out.push_back(e.path().filename().string());
      }
    }
    std::sort(out.begin(), out.end(), [&](const std::string& a, const std::string& b) {
      if ((a == cfg.variant) != (b == cfg.variant)) return a == cfg.variant;
      return a < b;
    });
    return out;
  };
  auto stages_in = [](const fs::path& dir) {
    std::vector<StagedCheckpoint> out = find_checkpoints(dir);
    return out;
  };
  auto label = [&](const std::string& variant, const std::string& stage) {
    const std::string base = stage == "sft" ? "SFT" : (stage == "rft" ? "SFT+RFT" : stage);
    return variant == cfg.variant ? base : base + " [" + variant + "]";
  };

  std::vector<std::pair<std::string, bool>> reasoning_rows;
  for (const auto& variant : variants_in(paths.root / "eval")) {
    for (const auto& s : stages_in(paths.eval_dir(variant))) {
      const auto doc = read_json(s.path);
      const PlanningMetrics m = planning_from_json(doc.at("planning"));
      if (variant == cfg.variant && s.stage.starts_with("rft_")) {
        std::string ratio = s.stage.substr(4);
        std::replace(ratio.begin(), ratio.end(), '-', ':');
        in.ratio_ablation.push_back({ratio, m});
        continue;
      }
      in.planning.push_back({label(variant, s.stage), m});
      if (s.stage == "rft") {
        const bool reasoning = doc.value("reasoning", true);
        in.reasoning_ablation.push_back(
            {std::string(reasoning ? "with reasoning" : "without reasoning") + " [" + variant +
                 "]",
             m});
      }
    }
  }
  if (in.reasoning_ablation.size() < 2) in.reasoning_ablation.clear();
  in.delta = std::make_pair(label(cfg.variant, "sft"), label(cfg.variant, "rft"));

  for (const auto& variant : variants_in(paths.root / "ood")) {
    for (const auto& s : stages_in(paths.ood_dir(variant))) {
      if (variant == cfg.variant && s.stage.starts_with("rft_")) continue;
      const auto doc = read_json(s.path);
      in.ood.push_back({label(variant, s.stage), ood_from_json(doc.at("ood"))});
    }
  }

  auto has_planning = [&](const std::string& name) {
    return std::any_of(in.planning.begin(), in.planning.end(),
                       [&](const NamedPlanning& p) { return p.name == name; });
  };
  if (!has_planning(label(cfg.variant, "sft"))) {
    in.gaps.push_back("no SFT evaluation for variant '" + cfg.variant + "' (run `planlab eval`)");
  }
  if (!has_planning(label(cfg.variant, "rft"))) {
    in.gaps.push_back("no RFT evaluation for variant '" + cfg.variant + "' (run `planlab eval`)");
  }
  if (in.ood.empty()) in.gaps.push_back("no OOD evaluation (run `planlab ood`)");

  const nlohmann::json doc = build_report(in);
  write_json(paths.report_dir() / "report.json", doc);
  {
    std::ofstream md(paths.report_dir() / "report.md");
    if (!md) throw PipelineError(ErrorCategory::Io, "cannot write report.md");
    md << render_markdown(doc);
  }
  say(ctx, "report: " + (paths.report_dir() / "report.md").string());
  return doc;
}

}  // namespace planlab
