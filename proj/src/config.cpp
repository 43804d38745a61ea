#include "planlab/config.hpp"

#include <set>
#include <stdexcept>

namespace planlab {

void ExperimentConfig::resolve() {
  if (variant.empty()) throw std::invalid_argument("variant must not be empty");
  if (threads < 1) throw std::invalid_argument("threads must be positive");
  sft.seed = seed;
  rft.seed = seed;
  sampling.seed = seed;
  split.seed = seed;
  validation.seed = seed;
  sft.include_reasoning = reasoning;
  sampling.max_len = std::min(sampling.max_len, model.max_len);
  data.validate();
  split.validate();
  sft.validate();
  rft.validate();
  sampling.validate();
  if (model.grid_size < 2) throw std::invalid_argument("model.grid_size must be at least 2");
  if (model.hidden < 1 || model.max_len < 1) {
    throw std::invalid_argument("model sizes must be positive");
  }
  for (const auto& r : ablation_ratios) {
    if (!(r.first + r.second > 0)) throw std::invalid_argument("ablation ratio sums to zero");
  }
}

PolicyShape ExperimentConfig::shape() const {
  return PolicyShape::for_vocab(vocab(), data.context_dim, model.hidden, model.max_len);
}

RewardOptions ExperimentConfig::reward_options() const {
  RewardOptions o;
  o.expected_n = static_cast<std::size_t>(data.n_waypoints);
  o.mode = reward_mode;
  o.require_reasoning = reasoning;
  return o;
}

ExperimentConfig paper_preset() {
  ExperimentConfig c;
  c.preset = "paper";
  return c;
}

ExperimentConfig benchmark_preset() {
  ExperimentConfig c;
  c.preset = "benchmark";
  c.sft.optimizer = Optimizer::Adam;
  c.sft.learning_rate = 3e-3;
  c.sft.weight_decay = 0.0;
  c.sft.batch_size = 64;
  c.sft.epochs = 12;
  c.rft.learning_rate = 0.5;
  c.rft.batch_size = 64;
  c.rft.epochs = 2;
  c.rft.max_grad_norm = 1.0;
  return c;
}

ExperimentConfig preset_by_name(std::string_view name) {
  if (name == "paper") return paper_preset();
  if (name == "benchmark") return benchmark_preset();
  throw std::invalid_argument("unknown preset '" + std::string(name) + "'");
}

std::string_view to_string(CoordinateMode m) {
  return m == CoordinateMode::Pixel ? "pixel" : "normalized";
}

std::string_view to_string(KlMode m) {
  return m == KlMode::FullVocabulary ? "full" : "estimator";
}

namespace {

CoordinateMode coordinate_mode(std::string_view s) {
  if (s == "normalized") return CoordinateMode::Normalized;
  if (s == "pixel") return CoordinateMode::Pixel;
  throw std::invalid_argument("unknown reward mode '" + std::string(s) + "'");
}

KlMode kl_mode(std::string_view s) {
  if (s == "estimator") return KlMode::Estimator;
  if (s == "full") return KlMode::FullVocabulary;
  throw std::invalid_argument("unknown kl_mode '" + std::string(s) + "'");
}

nlohmann::json ratio_json(const Ratio& r) { return r.str(); }

// Reads known keys of one object and rejects the rest.
class Section {
 public:
  Section(const nlohmann::json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw std::invalid_argument(path_ + ": expected an object");
  }
  void done() const {
    for (const auto& [key, _] : j_.items()) {
      if (!seen_.contains(key)) {
        throw std::invalid_argument(path_ + "." + key + ": unknown configuration key");
      }
    }
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw std::invalid_argument(path_ + "." + key + ": wrong type " + j_.at(key).dump());
    }
  }

  template <typename T, typename Fn>
  void get_as(const char* key, T& out, Fn&& convert) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = convert(j_.at(key).get<std::string>());
    } catch (const nlohmann::json::exception&) {
      throw std::invalid_argument(path_ + "." + key + ": expected a string");
    }
  }

  const nlohmann::json* child(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  const std::string& path() const { return path_; }

 private:
  const nlohmann::json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_ratio(Section& s, const char* key, Ratio& r) {
  s.get_as(key, r, [](const std::string& v) { return Ratio::parse(v); });
}

}  // namespace

nlohmann::json config_to_json(const ExperimentConfig& c) {
  nlohmann::json ratios = nlohmann::json::array();
  for (const auto& r : c.ablation_ratios) ratios.push_back(ratio_json(r));
  nlohmann::json split = {{"sft_rft", ratio_json(c.split.sft_rft)},
                          {"sft_straight_turn", ratio_json(c.split.sft_straight_turn)},
                          {"rft_straight_turn", ratio_json(c.split.rft_straight_turn)}};
  if (c.split.sft_count) split["sft_count"] = *c.split.sft_count;
  if (c.split.rft_count) split["rft_count"] = *c.split.rft_count;
  return {
      {"preset", c.preset},
      {"workdir", c.workdir.string()},
      {"seed", c.seed},
      {"variant", c.variant},
      {"reasoning", c.reasoning},
      {"threads", c.threads},
      {"model", {{"grid_size", c.model.grid_size}, {"hidden", c.model.hidden},
                 {"max_len", c.model.max_len}}},
      {"data",
       {{"samples", c.data.samples},
        {"val_dense", c.data.val_dense},
        {"val_standard_overlap", c.data.val_standard_overlap},
        {"val_standard_extra", c.data.val_standard_extra},
        {"ood_scenes", c.data.ood_scenes},
        {"width", c.data.resolution.width},
        {"height", c.data.resolution.height},
        {"n_waypoints", c.data.n_waypoints},
        {"context_dim", c.data.context_dim},
        {"turn_fraction", c.data.turn_fraction},
        {"straight_curvature", c.data.straight_curvature},
        {"turn_curvature_min", c.data.turn_curvature_min},
        {"turn_curvature_max", c.data.turn_curvature_max},
        {"noise_px", c.data.noise_px},
        {"turn_variance_threshold", c.data.turn_variance_threshold},
        {"max_boxes", c.data.max_boxes},
        {"on_path_fraction", c.data.on_path_fraction}}},
      {"split", std::move(split)},
      {"validation",
       {{"easy_size", c.validation.easy_size},
        {"hard_top_count", c.validation.hard_top_count},
        {"hard_bottom_count", c.validation.hard_bottom_count},
        {"top_fraction", c.validation.top_fraction},
        {"bottom_fraction", c.validation.bottom_fraction}}},
      {"sft",
       {{"batch_size", c.sft.batch_size},
        {"learning_rate", c.sft.learning_rate},
        {"weight_decay", c.sft.weight_decay},
        {"epochs", c.sft.epochs},
        {"optimizer", to_string(c.sft.optimizer)},
        {"max_grad_norm", c.sft.max_grad_norm}}},
      {"rft",
       {{"group_size", c.rft.group_size},
        {"kl_coeff", c.rft.kl_coeff},
        {"clip_eps", c.rft.clip_eps},
        {"batch_size", c.rft.batch_size},
        {"mini_batch", c.rft.mini_batch},
        {"learning_rate", c.rft.learning_rate},
        {"std_floor", c.rft.std_floor},
        {"inner_epochs", c.rft.inner_epochs},
        {"epochs", c.rft.epochs},
        {"max_grad_norm", c.rft.max_grad_norm},
        {"kl_mode", to_string(c.rft.kl_mode)}}},
      {"sampling",
       {{"top_p", c.sampling.top_p},
        {"temperature", c.sampling.temperature},
        {"repetition_penalty", c.sampling.repetition_penalty},
        {"max_len", c.sampling.max_len},
        {"corruption_prob", c.sampling.corruption_prob}}},
      {"reward_mode", to_string(c.reward_mode)},
      {"eval_greedy", c.eval_greedy},
      {"ablation_ratios", std::move(ratios)},
  };
}

ExperimentConfig config_from_json(const nlohmann::json& j, ExperimentConfig c) {
  if (j.contains("preset")) {
    const auto name = j.at("preset").get<std::string>();
    if (name != c.preset) c = preset_by_name(name);
  }
  Section top(j, "config");
  top.get("preset", c.preset);
  std::string workdir = c.workdir.string();
  top.get("workdir", workdir);
  c.workdir = workdir;
  top.get("seed", c.seed);
  top.get("variant", c.variant);
  top.get("reasoning", c.reasoning);
  top.get("threads", c.threads);
  top.get_as("reward_mode", c.reward_mode, coordinate_mode);
  top.get("eval_greedy", c.eval_greedy);
  if (const auto* r = top.child("ablation_ratios")) {
    if (!r->is_array()) throw std::invalid_argument("config.ablation_ratios: expected an array");
    c.ablation_ratios.clear();
    for (const auto& v : *r) c.ablation_ratios.push_back(Ratio::parse(v.get<std::string>()));
  }
  if (const auto* m = top.child("model")) {
    Section s(*m, "config.model");
    s.get("grid_size", c.model.grid_size);
    s.get("hidden", c.model.hidden);
    s.get("max_len", c.model.max_len);
    s.done();
  }
  if (const auto* d = top.child("data")) {
    Section s(*d, "config.data");
    s.get("samples", c.data.samples);
    s.get("val_dense", c.data.val_dense);
    s.get("val_standard_overlap", c.data.val_standard_overlap);
    s.get("val_standard_extra", c.data.val_standard_extra);
    s.get("ood_scenes", c.data.ood_scenes);
    s.get("width", c.data.resolution.width);
    s.get("height", c.data.resolution.height);
    s.get("n_waypoints", c.data.n_waypoints);
    s.get("context_dim", c.data.context_dim);
    s.get("turn_fraction", c.data.turn_fraction);
    s.get("straight_curvature", c.data.straight_curvature);
    s.get("turn_curvature_min", c.data.turn_curvature_min);
    s.get("turn_curvature_max", c.data.turn_curvature_max);
    s.get("noise_px", c.data.noise_px);
    s.get("turn_variance_threshold", c.data.turn_variance_threshold);
    s.get("max_boxes", c.data.max_boxes);
    s.get("on_path_fraction", c.data.on_path_fraction);
    s.done();
  }
  if (const auto* sp = top.child("split")) {
    Section s(*sp, "config.split");
    read_ratio(s, "sft_rft", c.split.sft_rft);
    read_ratio(s, "sft_straight_turn", c.split.sft_straight_turn);
    read_ratio(s, "rft_straight_turn", c.split.rft_straight_turn);
    if (const auto* v = s.child("sft_count")) c.split.sft_count = v->get<std::size_t>();
    if (const auto* v = s.child("rft_count")) c.split.rft_count = v->get<std::size_t>();
    s.done();
  }
  if (const auto* v = top.child("validation")) {
    Section s(*v, "config.validation");
    s.get("easy_size", c.validation.easy_size);
    s.get("hard_top_count", c.validation.hard_top_count);
    s.get("hard_bottom_count", c.validation.hard_bottom_count);
    s.get("top_fraction", c.validation.top_fraction);
    s.get("bottom_fraction", c.validation.bottom_fraction);
    s.done();
  }
  if (const auto* v = top.child("sft")) {
    Section s(*v, "config.sft");
    s.get("batch_size", c.sft.batch_size);
    s.get("learning_rate", c.sft.learning_rate);
    s.get("weight_decay", c.sft.weight_decay);
    s.get("epochs", c.sft.epochs);
    s.get_as("optimizer", c.sft.optimizer, optimizer_from_string);
    s.get("max_grad_norm", c.sft.max_grad_norm);
    s.done();
  }
  if (const auto* v = top.child("rft")) {
    Section s(*v, "config.rft");
    s.get("group_size", c.rft.group_size);
    s.get("kl_coeff", c.rft.kl_coeff);
    s.get("clip_eps", c.rft.clip_eps);
    s.get("batch_size", c.rft.batch_size);
    s.get("mini_batch", c.rft.mini_batch);
    s.get("learning_rate", c.rft.learning_rate);
    s.get("std_floor", c.rft.std_floor);
    s.get("inner_epochs", c.rft.inner_epochs);
    s.get("epochs", c.rft.epochs);
    s.get("max_grad_norm", c.rft.max_grad_norm);
    s.get_as("kl_mode", c.rft.kl_mode, kl_mode);
    s.done();
  }
  if (const auto* v = top.child("sampling")) {
    Section s(*v, "config.sampling");
    s.get("top_p", c.sampling.top_p);
    s.get("temperature", c.sampling.temperature);
    s.get("repetition_penalty", c.sampling.repetition_penalty);
    s.get("max_len", c.sampling.max_len);
    s.get("corruption_prob", c.sampling.corruption_prob);
    s.done();
  }
  top.done();
  return c;
}

}  // namespace planlab
