#include "planlab/evaluator.hpp"

#include "planlab/rewards.hpp"

#include <algorithm>
#include <stdexcept>

namespace planlab {

std::vector<std::optional<Trajectory>> FunctionPredictor::predict(
    std::span<const Query> queries) const {
  std::vector<std::optional<Trajectory>> out;
  out.reserve(queries.size());
  for (const auto& q : queries) out.push_back(fn_(q));
  return out;
}

PolicyPredictor::PolicyPredictor(const PolicyParams& params, const Vocab& vocab,
                                 DecodeOptions options)
    : params_(params), vocab_(vocab), options_(std::move(options)) {
  if (!options_.greedy) options_.sampling.validate();
}

std::vector<std::optional<Trajectory>> PolicyPredictor::predict(
    std::span<const Query> queries) const {
  std::vector<Eigen::VectorXd> contexts;
  contexts.reserve(queries.size());
  for (const auto& q : queries) contexts.push_back(q.context);

  std::vector<TokenSeq> tokens;
  if (options_.greedy) {
    tokens = greedy_batch(params_, contexts, vocab_, params_.shape().max_len);
  } else {
    std::vector<Rng> rngs;
    for (std::size_t i = 0; i < queries.size(); ++i) {
      rngs.push_back(derive_rng(options_.sampling.seed, 0xe7a1, i));
    }
    for (auto& r : sample_batch(params_, contexts, vocab_, options_.sampling, rngs)) {
      tokens.push_back(std::move(r.tokens));
    }
  }

  std::vector<std::optional<Trajectory>> out;
  out.reserve(queries.size());
  for (std::size_t i = 0; i < queries.size(); ++i) {
    const auto parsed =
        parse_response(render_response(tokens[i], queries[i].resolution, vocab_), options_.parse);
    if (parsed.response) {
      out.push_back(parsed.response->trajectory);
    } else {
      out.push_back(std::nullopt);
    }
  }
  return out;
}

PlanningMetrics eval_planning(const Predictor& predictor, std::span<const Sample> samples) {
  std::vector<Query> queries;
  queries.reserve(samples.size());
  for (const auto& s : samples) queries.push_back({s.context, s.resolution});
  const auto predictions = predictor.predict(queries);
  if (predictions.size() != samples.size()) {
    throw std::runtime_error("predictor returned the wrong number of trajectories");
  }

  PlanningMetrics out;
  std::map<std::string, std::size_t> scored;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Sample& s = samples[i];
    auto& m = out[std::string(to_string(s.tag))];
    ++m.samples;
    const auto& pred = predictions[i];
    if (!pred || pred->cols() != s.trajectory.cols()) {
      ++m.decode_failures;
      continue;
    }
    const Points2<double> p = normalize(*pred, s.resolution);
    const Points2<double> g = normalize(s.trajectory, s.resolution);
    m.ade_pct += 100.0 * ade(p, g);
    m.fde_pct += 100.0 * fde(p, g);
    ++scored[std::string(to_string(s.tag))];
  }
  for (auto& [tag, m] : out) {
    const std::size_t n = scored[tag];
    if (n > 0) {
      m.ade_pct /= static_cast<double>(n);
      m.fde_pct /= static_cast<double>(n);
    }
  }
  return out;
}

OodResult eval_ood(const Predictor& predictor, std::span<const OodScene> scenes) {
  if (scenes.empty()) throw std::invalid_argument("eval_ood needs at least one scene");
  std::vector<Query> queries;
  queries.reserve(scenes.size());
  for (const auto& s : scenes) queries.push_back({s.context, s.resolution});
  const auto predictions = predictor.predict(queries);
  if (predictions.size() != scenes.size()) {
    throw std::runtime_error("predictor returned the wrong number of trajectories");
  }

  OodResult out;
  std::size_t failed = 0, hits = 0;
  double penetration = 0.0;
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    const OodScene& scene = scenes[i];
    SceneOutcome o{scene.id, 0, 0.0, false};
    out.boxes += scene.boxes.size();
    if (!predictions[i] || predictions[i]->cols() < 2 || !predictions[i]->allFinite()) {
      o.decode_failed = true;
      ++out.decode_failures;
      ++failed;
    } else {
      const Polyline<double> path(*predictions[i]);
      for (const auto& box : scene.boxes) {
        if (intersects(path, box)) {
          ++o.boxes_hit;
          o.penetration += clip_length(path, box);
        }
      }
      if (o.boxes_hit > 0) ++failed;
      hits += static_cast<std::size_t>(o.boxes_hit);
      penetration += o.penetration;
    }
    out.per_scene.push_back(std::move(o));
  }
  const double n = static_cast<double>(scenes.size());
  out.scenes = scenes.size();
  out.metrics = {static_cast<double>(failed) / n, static_cast<double>(hits) / n,
                 penetration / n};
  return out;
}

std::vector<WeightScheme> WeightScheme::presets() {
  return {balanced(), safety_focused(), performance_focused(), equal()};
}

std::vector<std::vector<double>> safety_scores(std::span<const SafetyMetrics> models,
                                               std::span<const WeightScheme> schemes) {
  if (models.size() < 2) {
    throw std::invalid_argument(
        "safety scores need at least two models; compare raw F/C/P for a single model");
  }
  for (const auto& w : schemes) {
    if (w.w_fail < 0 || w.w_collision < 0 || w.w_penetration < 0) {
      throw std::invalid_argument("weight scheme '" + w.name + "' has a negative weight");
    }
  }
  const std::size_t k = models.size();
  // normalized[metric][model]
  std::vector<std::vector<double>> normalized(3, std::vector<double>(k, 0.0));
  for (int j = 0; j < 3; ++j) {
    auto value = [&](std::size_t i) {
      const auto& m = models[i];
      return j == 0 ? m.fail_rate : (j == 1 ? m.collision_count : m.penetration);
    };
    double lo = value(0), hi = value(0);
    for (std::size_t i = 1; i < k; ++i) {
      lo = std::min(lo, value(i));
      hi = std::max(hi, value(i));
    }
    if (hi > lo) {
      for (std::size_t i = 0; i < k; ++i) normalized[j][i] = (value(i) - lo) / (hi - lo);
    }
  }
  std::vector<std::vector<double>> scores(k, std::vector<double>(schemes.size(), 0.0));
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t s = 0; s < schemes.size(); ++s) {
      const auto& w = schemes[s];
      scores[i][s] = w.w_fail * (1.0 - normalized[0][i]) +
                     w.w_collision * (1.0 - normalized[1][i]) +
                     w.w_penetration * (1.0 - normalized[2][i]);
    }
  }
  return scores;
}

}  // namespace planlab
