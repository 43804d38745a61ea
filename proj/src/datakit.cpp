#include "planlab/datakit.hpp"

#include "planlab/parsing.hpp"
#include "planlab/policy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

namespace planlab {

namespace {

constexpr std::string_view kTagNames[] = {"unassigned",   "sft_straight", "sft_turn",
                                          "rft_straight", "rft_turn",     "val_easy",
                                          "val_hard"};

const std::vector<std::string> kHazards = {"clear", "cones", "barrier", "worker", "vehicle",
                                           "debris"};
// The last hazard only shows up in out-of-distribution scenes.
constexpr int kTrainHazards = 5;

double round_cents(double v) { return std::round(v * 100.0) / 100.0; }

std::vector<std::size_t> variance_order(std::span<const Sample> samples) {
  std::vector<double> var(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) var[i] = x_variance(samples[i].trajectory);
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (var[a] != var[b]) return var[a] > var[b];
    return samples[a].id < samples[b].id;
  });
  return order;
}

}  // namespace

std::string_view to_string(SplitTag tag) { return kTagNames[static_cast<int>(tag)]; }

SplitTag split_tag_from_string(std::string_view s) {
  for (int i = 0; i < static_cast<int>(std::size(kTagNames)); ++i) {
    if (kTagNames[i] == s) return static_cast<SplitTag>(i);
  }
  throw std::invalid_argument("unknown split tag '" + std::string(s) + "'");
}

bool is_sft(SplitTag tag) { return tag == SplitTag::SftStraight || tag == SplitTag::SftTurn; }
bool is_rft(SplitTag tag) { return tag == SplitTag::RftStraight || tag == SplitTag::RftTurn; }

// ---------------------------------------------------------------------------
// Splitting

Ratio Ratio::parse(std::string_view text) {
  const auto colon = text.find(':');
  if (colon == std::string_view::npos) {
    throw std::invalid_argument("ratio '" + std::string(text) + "' must look like a:b");
  }
  auto number = [&](std::string_view part) {
    const std::string s(part);
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(v) || v < 0) {
      throw std::invalid_argument("ratio '" + std::string(text) + "' has a bad term");
    }
    return v;
  };
  Ratio r{number(text.substr(0, colon)), number(text.substr(colon + 1))};
  if (r.first + r.second <= 0) {
    throw std::invalid_argument("ratio '" + std::string(text) + "' sums to zero");
  }
  return r;
}

std::string Ratio::str() const {
  std::ostringstream os;
  os << first << ':' << second;
  return os.str();
}

void SplitPlan::validate() const {
  for (const Ratio* r : {&sft_rft, &sft_straight_turn, &rft_straight_turn}) {
    if (!(r->first >= 0 && r->second >= 0 && r->first + r->second > 0) ||
        !std::isfinite(r->first) || !std::isfinite(r->second)) {
      throw std::invalid_argument("split ratio " + r->str() + " is not sum-normalizable");
    }
  }
}

SplitCounts plan_counts(std::size_t dataset_size, const SplitPlan& plan) {
  plan.validate();
  std::size_t n_sft = 0, n_rft = 0;
  if (plan.sft_count || plan.rft_count) {
    n_sft = plan.sft_count.value_or(0);
    n_rft = plan.rft_count.value_or(0);
    if (!plan.sft_count) n_sft = dataset_size > n_rft ? dataset_size - n_rft : 0;
    if (!plan.rft_count) n_rft = dataset_size > n_sft ? dataset_size - n_sft : 0;
  } else {
    n_sft = static_cast<std::size_t>(
        std::llround(static_cast<double>(dataset_size) * plan.sft_rft.first_share()));
    n_rft = dataset_size - n_sft;
  }
  if (n_sft + n_rft > dataset_size) {
    throw std::invalid_argument("split needs " + std::to_string(n_sft + n_rft) +
                                " samples but the dataset has " + std::to_string(dataset_size) +
                                " (deficit " + std::to_string(n_sft + n_rft - dataset_size) +
                                ")");
  }
  const double sft_turn_share = 1.0 - plan.sft_straight_turn.first_share();
  const double rft_turn_share = 1.0 - plan.rft_straight_turn.first_share();
  SplitCounts c;
  c.sft_turn = static_cast<std::size_t>(std::llround(n_sft * sft_turn_share));
  // Round the turn total once so both splits together stay within one sample
  // of the plan.
  const auto turn_total = static_cast<std::size_t>(
      std::llround(n_sft * sft_turn_share + n_rft * rft_turn_share));
  c.rft_turn = std::min(n_rft, turn_total > c.sft_turn ? turn_total - c.sft_turn : 0);
  c.sft_straight = n_sft - c.sft_turn;
  c.rft_straight = n_rft - c.rft_turn;
  return c;
}

std::vector<Sample> split_sft_rft(std::vector<Sample> dataset, const SplitPlan& plan) {
  const SplitCounts c = plan_counts(dataset.size(), plan);
  const auto order = variance_order(dataset);
  for (auto& s : dataset) s.tag = SplitTag::Unassigned;
  std::size_t k = 0;
  auto assign = [&](std::size_t n, SplitTag tag) {
    for (std::size_t end = k + n; k < end; ++k) dataset[order[k]].tag = tag;
  };
  assign(c.rft_turn, SplitTag::RftTurn);
  assign(c.sft_turn, SplitTag::SftTurn);
  assign(c.sft_straight, SplitTag::SftStraight);
  assign(c.rft_straight, SplitTag::RftStraight);
  return dataset;
}

std::map<SplitTag, std::size_t> tag_counts(std::span<const Sample> samples) {
  std::map<SplitTag, std::size_t> counts;
  for (const auto& s : samples) ++counts[s.tag];
  return counts;
}

ValidationSets build_validation_sets(std::span<const Sample> dense,
                                     std::span<const Sample> standard,
                                     const ValidationPlan& plan) {
  std::set<std::string> standard_ids;
  for (const auto& s : standard) standard_ids.insert(s.id);
  std::vector<Sample> val;
  for (const auto& s : dense) {
    if (!standard_ids.contains(s.id)) val.push_back(s);
  }
  const std::size_t n = val.size();
  const auto order = variance_order(val);

  const std::size_t top = static_cast<std::size_t>(std::floor(plan.top_fraction * n));
  const std::size_t bottom = static_cast<std::size_t>(std::floor(plan.bottom_fraction * n));
  const std::size_t half = plan.easy_size / 2;
  if (plan.easy_size > n || n / 2 < half || n / 2 - half + plan.easy_size > n) {
    throw std::invalid_argument("easy set of " + std::to_string(plan.easy_size) +
                                " does not fit " + std::to_string(n) + " candidates");
  }
  if (plan.hard_top_count > top) {
    throw std::invalid_argument("hard set wants " + std::to_string(plan.hard_top_count) +
                                " from the top slice of " + std::to_string(top));
  }
  if (plan.hard_bottom_count > bottom) {
    throw std::invalid_argument("hard set wants " + std::to_string(plan.hard_bottom_count) +
                                " from the bottom slice of " + std::to_string(bottom));
  }

  ValidationSets out;
  const std::size_t begin = n / 2 - half;
  for (std::size_t k = begin; k < begin + plan.easy_size; ++k) {
    out.easy.push_back(val[order[k]]);
    out.easy.back().tag = SplitTag::ValEasy;
  }

  Rng rng = derive_rng(plan.seed, 0xa1a2);
  auto draw = [&](std::size_t from, std::size_t to, std::size_t count) {
    std::vector<std::size_t> pool(order.begin() + from, order.begin() + to);
    // Partial Fisher-Yates; the draw is fully determined by the seed.
    for (std::size_t i = 0; i < count; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
      std::swap(pool[i], pool[pick(rng)]);
      out.hard.push_back(val[pool[i]]);
      out.hard.back().tag = SplitTag::ValHard;
    }
  };
  draw(0, top, plan.hard_top_count);
  draw(n - bottom, n, plan.hard_bottom_count);
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic generator

void SyntheticConfig::validate() const {
  if (n_waypoints < 1) throw std::invalid_argument("n_waypoints must be positive");
  if (context_dim < 10) throw std::invalid_argument("context_dim must be at least 10");
  if (!(resolution.width > 0 && resolution.height > 0)) {
    throw std::invalid_argument("resolution must be positive");
  }
  if (!(turn_fraction >= 0 && turn_fraction <= 1)) {
    throw std::invalid_argument("turn_fraction must lie in [0, 1]");
  }
  if (!(turn_curvature_min >= 0 && turn_curvature_min <= turn_curvature_max &&
        turn_curvature_max <= 1 && straight_curvature >= 0)) {
    throw std::invalid_argument("curvature ranges are inconsistent");
  }
  if (noise_px < 0) throw std::invalid_argument("noise_px must be non-negative");
  if (val_standard_overlap > val_dense) {
    throw std::invalid_argument("standard overlap exceeds the dense validation set");
  }
  if (max_boxes < 1) throw std::invalid_argument("max_boxes must be positive");
}

Eigen::VectorXd encode_context(const SceneParams& scene, std::span<const double> nuisance,
                               int context_dim) {
  Eigen::VectorXd c = Eigen::VectorXd::Zero(context_dim);
  c[0] = scene.curvature;
  c[1] = scene.offset;
  c[2] = 2.0 * scene.length - 1.0;
  c[3 + scene.hazard] = 1.0;
  c[9] = scene.side;
  for (int i = 10; i < context_dim; ++i) {
    const auto k = static_cast<std::size_t>(i - 10);
    c[i] = k < nuisance.size() ? nuisance[k] : 0.0;
  }
  return c;
}

Trajectory nominal_trajectory(const SceneParams& scene, Resolution res, int n_waypoints) {
  Trajectory t(2, n_waypoints);
  const double x0 = res.width * (0.5 + 0.08 * scene.offset);
  const double y0 = 0.95 * res.height;
  const double reach = res.height * (0.35 + 0.25 * scene.length);
  for (int i = 0; i < n_waypoints; ++i) {
    const double s = static_cast<double>(i + 1) / n_waypoints;
    t(0, i) = x0 + 0.25 * res.width * scene.curvature * s * s;
    t(1, i) = y0 - reach * s;
  }
  return t;
}

std::string describe_scene(const SceneParams& scene) {
  std::string out = kHazards.at(static_cast<std::size_t>(scene.hazard));
  out += scene.hazard == 0 ? " ahead" : (scene.side < 0 ? " left" : " right");
  if (std::abs(scene.curvature) < 0.1) {
    out += " keep straight";
  } else {
    out += scene.curvature < 0 ? " turn left" : " turn right";
  }
  return out;
}

namespace {

struct Drawn {
  SceneParams scene;
  std::vector<double> nuisance;
};

Drawn draw_scene(const SyntheticConfig& cfg, Rng& rng, bool ood) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  Drawn d;
  SceneParams& s = d.scene;
  const bool turn = unit(rng) < cfg.turn_fraction;
  if (turn) {
    const double mag =
        cfg.turn_curvature_min + (cfg.turn_curvature_max - cfg.turn_curvature_min) * unit(rng);
    s.curvature = unit(rng) < 0.5 ? -mag : mag;
  } else {
    s.curvature = cfg.straight_curvature * (2.0 * unit(rng) - 1.0);
  }
  s.offset = 2.0 * unit(rng) - 1.0;
  s.length = unit(rng);
  if (ood) {
    s.hazard = kTrainHazards;
  } else {
    s.hazard = turn ? 1 + static_cast<int>(unit(rng) * (kTrainHazards - 1))
                    : static_cast<int>(unit(rng) * kTrainHazards);
  }
  // Turns steer away from the hazard.
  s.side = turn ? (s.curvature < 0 ? 1 : -1) : (unit(rng) < 0.5 ? -1 : 1);
  const double spread = ood ? 1.5 : 0.5;
  d.nuisance.resize(static_cast<std::size_t>(cfg.context_dim - 10));
  for (auto& v : d.nuisance) v = spread * normal(rng);
  return d;
}

Sample make_sample(const SyntheticConfig& cfg, Rng& rng, std::string id) {
  const Drawn d = draw_scene(cfg, rng, false);
  std::uniform_real_distribution<double> jitter(-cfg.noise_px, cfg.noise_px);
  Trajectory t = nominal_trajectory(d.scene, cfg.resolution, cfg.n_waypoints);
  for (Eigen::Index i = 0; i < t.cols(); ++i) {
    t(0, i) = round_cents(std::clamp(t(0, i) + jitter(rng), 0.0, cfg.resolution.width));
    t(1, i) = round_cents(std::clamp(t(1, i) + jitter(rng), 0.0, cfg.resolution.height));
  }
  Sample s;
  s.id = std::move(id);
  s.context = encode_context(d.scene, d.nuisance, cfg.context_dim);
  s.resolution = cfg.resolution;
  s.reasoning = describe_scene(d.scene);
  s.trajectory = std::move(t);
  s.image = "synthetic://" + s.id;
  return s;
}

OodScene make_scene(const SyntheticConfig& cfg, Rng& rng, std::string id) {
  const Drawn d = draw_scene(cfg, rng, true);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const Trajectory path = nominal_trajectory(d.scene, cfg.resolution, cfg.n_waypoints);
  const double W = cfg.resolution.width, H = cfg.resolution.height;
  OodScene scene;
  scene.id = std::move(id);
  scene.context = encode_context(d.scene, d.nuisance, cfg.context_dim);
  scene.resolution = cfg.resolution;
  const int count = 1 + static_cast<int>(unit(rng) * cfg.max_boxes);
  for (int b = 0; b < count; ++b) {
    const double w = std::round(24.0 + 40.0 * unit(rng));
    const double h = std::round(16.0 + 24.0 * unit(rng));
    const auto at = static_cast<Eigen::Index>(cfg.n_waypoints / 4 +
                                              unit(rng) * (cfg.n_waypoints * 3 / 4));
    const Eigen::Index k = std::min<Eigen::Index>(at, cfg.n_waypoints - 1);
    double cx = path(0, k);
    const double cy = path(1, k);
    if (unit(rng) >= cfg.on_path_fraction) {
      const double gap = 60.0 + 60.0 * unit(rng);
      cx += unit(rng) < 0.5 ? -gap : gap;
    }
    cx = std::clamp(std::round(cx), w / 2, W - w / 2);
    const double cyc = std::clamp(std::round(cy), h / 2, H - h / 2);
    scene.boxes.emplace_back(cx - w / 2, cyc - h / 2, cx + w / 2, cyc + h / 2);
  }
  return scene;
}

std::string numbered(std::string_view prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*s-%05zu", static_cast<int>(prefix.size()), prefix.data(), i);
  return buf;
}

}  // namespace

SyntheticCorpus generate_synthetic(const SyntheticConfig& config, std::uint64_t seed) {
  config.validate();
  SyntheticCorpus out;
  out.samples.reserve(config.samples);
  for (std::size_t i = 0; i < config.samples; ++i) {
    Rng rng = derive_rng(seed, 1, i);
    out.samples.push_back(make_sample(config, rng, numbered("trn", i)));
  }
  for (std::size_t i = 0; i < config.val_dense; ++i) {
    Rng rng = derive_rng(seed, 2, i);
    out.val_dense.push_back(make_sample(config, rng, numbered("val", i)));
  }
  // The standard annotations overlap a seeded subset of the dense set and add
  // a few of their own.
  std::vector<std::size_t> pick(config.val_dense);
  std::iota(pick.begin(), pick.end(), 0);
  Rng shuffle = derive_rng(seed, 3);
  std::shuffle(pick.begin(), pick.end(), shuffle);
  pick.resize(config.val_standard_overlap);
  std::sort(pick.begin(), pick.end());
  for (std::size_t i : pick) out.val_standard.push_back(out.val_dense[i]);
  for (std::size_t i = 0; i < config.val_standard_extra; ++i) {
    Rng rng = derive_rng(seed, 4, i);
    out.val_standard.push_back(make_sample(config, rng, numbered("std", i)));
  }
  for (std::size_t i = 0; i < config.ood_scenes; ++i) {
    Rng rng = derive_rng(seed, 5, i);
    out.ood.push_back(make_scene(config, rng, numbered("ood", i)));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Serialization

DataError::DataError(const std::string& source, std::size_t line, const std::string& field,
                     const std::string& message)
    : std::runtime_error(source + ":" + std::to_string(line) + ": " +
                         (field.empty() ? std::string() : field + ": ") + message),
      line_(line),
      field_(field) {}

namespace {

// Field-level failure inside one record; the loader adds source and line.
struct FieldError {
  std::string field;
  std::string message;
};

const nlohmann::json& require(const nlohmann::json& j, const std::string& key,
                              const std::string& path) {
  if (!j.is_object()) throw FieldError{path, "expected an object"};
  const auto it = j.find(key);
  if (it == j.end()) throw FieldError{path.empty() ? key : path + "." + key, "missing field"};
  return *it;
}

double number(const nlohmann::json& j, const std::string& path) {
  if (!j.is_number()) throw FieldError{path, "expected a number"};
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw FieldError{path, "not finite"};
  return v;
}

std::string text(const nlohmann::json& j, const std::string& path) {
  if (!j.is_string()) throw FieldError{path, "expected a string"};
  return j.get<std::string>();
}

Eigen::VectorXd read_context(const nlohmann::json& j) {
  if (!j.is_array()) throw FieldError{"context", "expected an array of numbers"};
  Eigen::VectorXd c(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    c[static_cast<Eigen::Index>(i)] = number(j[i], "context[" + std::to_string(i) + "]");
  }
  return c;
}

Resolution read_resolution(const nlohmann::json& j) {
  Resolution r{number(require(j, "width", ""), "width"),
               number(require(j, "height", ""), "height")};
  if (r.width <= 0) throw FieldError{"width", "must be positive"};
  if (r.height <= 0) throw FieldError{"height", "must be positive"};
  return r;
}

void check_bounds(const Trajectory& t, Resolution r, const std::string& field) {
  for (Eigen::Index i = 0; i < t.cols(); ++i) {
    if (t(0, i) < 0 || t(0, i) > r.width || t(1, i) < 0 || t(1, i) > r.height) {
      throw FieldError{field + "[" + std::to_string(i) + "]", "outside the image bounds"};
    }
  }
}

nlohmann::json context_json(const Eigen::VectorXd& c) {
  return std::vector<double>(c.data(), c.data() + c.size());
}

template <typename Fn>
auto for_each_record(const std::filesystem::path& path, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  const std::string source = path.string();
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string all = buf.str();

  auto run = [&](const nlohmann::json& j, std::size_t line, const std::string& prefix) {
    try {
      fn(j);
    } catch (const FieldError& e) {
      throw DataError(source, line, prefix + e.field, e.message);
    } catch (const std::invalid_argument& e) {
      throw DataError(source, line, prefix, e.what());
    }
  };

  const auto first = all.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && all[first] == '[') {
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(all);
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError(source, 1, "", std::string("malformed JSON array: ") + e.what());
    }
    for (std::size_t i = 0; i < doc.size(); ++i) {
      run(doc[i], i + 1, "[" + std::to_string(i) + "].");
    }
    return;
  }

  std::istringstream lines(all);
  std::string line;
  std::size_t number = 0;
  while (std::getline(lines, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError(source, number, "", std::string("malformed JSON: ") + e.what());
    }
    run(j, number, "");
  }
}

void write_lines(const std::filesystem::path& path, const std::vector<nlohmann::json>& records) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& r : records) out << r.dump() << '\n';
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace

nlohmann::json sample_to_json(const Sample& s) {
  nlohmann::json traj = nlohmann::json::array();
  for (Eigen::Index i = 0; i < s.trajectory.cols(); ++i) {
    traj.push_back({{"x", s.trajectory(0, i)}, {"y", s.trajectory(1, i)}});
  }
  nlohmann::json j = {{"id", s.id},
                      {"context", context_json(s.context)},
                      {"width", s.resolution.width},
                      {"height", s.resolution.height},
                      {"reasoning", s.reasoning},
                      {"trajectory", std::move(traj)},
                      {"tag", to_string(s.tag)}};
  if (!s.image.empty()) j["image"] = s.image;
  return j;
}

namespace {

Sample read_sample(const nlohmann::json& j, const LoadOptions& options) {
  if (!j.is_object()) throw FieldError{"", "expected an object"};
  Sample s;
  s.id = text(require(j, "id", ""), "id");
  s.resolution = read_resolution(j);
  if (j.contains("context")) s.context = read_context(j["context"]);
  if (j.contains("image")) s.image = text(j["image"], "image");
  if (j.contains("tag")) {
    try {
      s.tag = split_tag_from_string(text(j["tag"], "tag"));
    } catch (const std::invalid_argument& e) {
      throw FieldError{"tag", e.what()};
    }
  }

  std::string field = "trajectory";
  if (j.contains("trajectory")) {
    const auto& jt = j["trajectory"];
    if (!jt.is_array()) throw FieldError{"trajectory", "expected an array of points"};
    s.trajectory.resize(2, static_cast<Eigen::Index>(jt.size()));
    for (std::size_t i = 0; i < jt.size(); ++i) {
      const std::string at = "trajectory[" + std::to_string(i) + "]";
      s.trajectory(0, static_cast<Eigen::Index>(i)) = number(require(jt[i], "x", at), at + ".x");
      s.trajectory(1, static_cast<Eigen::Index>(i)) = number(require(jt[i], "y", at), at + ".y");
    }
    s.reasoning = j.contains("reasoning") ? text(j["reasoning"], "reasoning") : std::string();
  } else if (j.contains("response")) {
    // Instruction-following record: the answer carries the trajectory.
    field = "response";
    ParseOptions po;
    po.expected_n = options.expected_n;
    const std::string response = text(j["response"], "response");
    const auto parsed = parse_response(response, po);
    if (!parsed.response) {
      throw FieldError{"response", "unparseable (" +
                                       std::string(to_string(*parsed.verdict.failure)) + ")"};
    }
    s.trajectory = parsed.response->trajectory;
    s.reasoning = parsed.response->reasoning;
  } else {
    throw FieldError{"trajectory", "missing field"};
  }
  if (options.expected_n > 0 &&
      s.trajectory.cols() != static_cast<Eigen::Index>(options.expected_n)) {
    throw FieldError{field, "expected " + std::to_string(options.expected_n) + " points, got " +
                                std::to_string(s.trajectory.cols())};
  }
  if (s.trajectory.cols() < 1) throw FieldError{field, "empty trajectory"};
  check_bounds(s.trajectory, s.resolution, field);
  return s;
}

OodScene read_scene(const nlohmann::json& j) {
  if (!j.is_object()) throw FieldError{"", "expected an object"};
  OodScene s;
  s.id = text(require(j, "id", ""), "id");
  s.resolution = read_resolution(j);
  if (j.contains("context")) s.context = read_context(j["context"]);
  const auto& jb = require(j, "boxes", "");
  if (!jb.is_array()) throw FieldError{"boxes", "expected an array"};
  for (std::size_t i = 0; i < jb.size(); ++i) {
    const std::string at = "boxes[" + std::to_string(i) + "]";
    const double x0 = number(require(jb[i], "x_min", at), at + ".x_min");
    const double y0 = number(require(jb[i], "y_min", at), at + ".y_min");
    const double x1 = number(require(jb[i], "x_max", at), at + ".x_max");
    const double y1 = number(require(jb[i], "y_max", at), at + ".y_max");
    try {
      s.boxes.emplace_back(x0, y0, x1, y1);
    } catch (const std::invalid_argument& e) {
      throw FieldError{at, e.what()};
    }
    if (x0 < 0 || y0 < 0 || x1 > s.resolution.width || y1 > s.resolution.height) {
      throw FieldError{at, "outside the image bounds"};
    }
  }
  return s;
}

template <typename Fn>
auto single_record(Fn&& fn) {
  try {
    return fn();
  } catch (const FieldError& e) {
    throw DataError("<record>", 1, e.field, e.message);
  }
}

}  // namespace

Sample sample_from_json(const nlohmann::json& j, const LoadOptions& options) {
  return single_record([&] { return read_sample(j, options); });
}

std::string instruction_prompt(int n_waypoints) {
  return "Predict the ego vehicle's path over the next " + std::to_string(n_waypoints) +
         " waypoints as (x, y) pixel coordinates. Describe the relevant scene elements "
         "inside <think></think>, then give the waypoints inside <answer></answer>.";
}

nlohmann::json to_instruction_record(const Sample& s) {
  return {{"id", s.id},
          {"image", s.image.empty() ? "synthetic://" + s.id : s.image},
          {"prompt", instruction_prompt(static_cast<int>(s.trajectory.cols()))},
          {"response", serialize_response(s.reasoning, s.trajectory)},
          {"context", context_json(s.context)},
          {"width", s.resolution.width},
          {"height", s.resolution.height},
          {"tag", to_string(s.tag)}};
}

nlohmann::json scene_to_json(const OodScene& s) {
  nlohmann::json boxes = nlohmann::json::array();
  for (const auto& b : s.boxes) {
    boxes.push_back(
        {{"x_min", b.x_min()}, {"y_min", b.y_min()}, {"x_max", b.x_max()}, {"y_max", b.y_max()}});
  }
  return {{"id", s.id},
          {"context", context_json(s.context)},
          {"width", s.resolution.width},
          {"height", s.resolution.height},
          {"boxes", std::move(boxes)}};
}

OodScene scene_from_json(const nlohmann::json& j) {
  return single_record([&] { return read_scene(j); });
}

std::vector<Sample> load_samples(const std::filesystem::path& path, const LoadOptions& options) {
  std::vector<Sample> out;
  for_each_record(path, [&](const nlohmann::json& j) { out.push_back(read_sample(j, options)); });
  return out;
}

void save_samples(std::span<const Sample> samples, const std::filesystem::path& path) {
  std::vector<nlohmann::json> records;
  records.reserve(samples.size());
  for (const auto& s : samples) records.push_back(sample_to_json(s));
  write_lines(path, records);
}

void save_instruction_samples(std::span<const Sample> samples,
                              const std::filesystem::path& path) {
  std::vector<nlohmann::json> records;
  records.reserve(samples.size());
  for (const auto& s : samples) records.push_back(to_instruction_record(s));
  write_lines(path, records);
}

std::vector<OodScene> load_scenes(const std::filesystem::path& path) {
  std::vector<OodScene> out;
  for_each_record(path, [&](const nlohmann::json& j) { out.push_back(read_scene(j)); });
  return out;
}

void save_scenes(std::span<const OodScene> scenes, const std::filesystem::path& path) {
  std::vector<nlohmann::json> records;
  records.reserve(scenes.size());
  for (const auto& s : scenes) records.push_back(scene_to_json(s));
  write_lines(path, records);
}

}  // namespace planlab
