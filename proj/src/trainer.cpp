#include "planlab/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace planlab {

std::string_view to_string(Optimizer o) { return o == Optimizer::Adam ? "adam" : "sgd"; }

Optimizer optimizer_from_string(std::string_view s) {
  if (s == "sgd") return Optimizer::Sgd;
  if (s == "adam") return Optimizer::Adam;
  throw std::invalid_argument("unknown optimizer '" + std::string(s) + "'");
}

namespace {

void clip_norm(Eigen::VectorXd& g, double max_norm) {
  if (max_norm <= 0) return;
  const double n = g.norm();
  if (n > max_norm) g *= max_norm / n;
}

std::vector<std::size_t> shuffled(std::size_t n, Rng rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

nlohmann::json vector_json(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

nlohmann::json group_dump(std::span<const GroupRollout> groups) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& g : groups) {
    nlohmann::json responses = nlohmann::json::array();
    for (const auto& r : g.responses) {
      responses.push_back({{"tokens", r.tokens},
                           {"old_logprobs", vector_json(r.old_logprobs)},
                           {"reward", r.reward.r_total},
                           {"advantage", r.advantage}});
    }
    out.push_back({{"context", vector_json(g.context)}, {"responses", std::move(responses)}});
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Supervised phase

void SftConfig::validate() const {
  if (batch_size == 0) throw std::invalid_argument("sft batch_size must be positive");
  if (!(learning_rate >= 0)) throw std::invalid_argument("sft learning_rate must be >= 0");
  if (!(weight_decay >= 0)) throw std::invalid_argument("sft weight_decay must be >= 0");
  if (epochs < 0) throw std::invalid_argument("sft epochs must be >= 0");
  if (!(max_grad_norm >= 0)) throw std::invalid_argument("sft max_grad_norm must be >= 0");
}

SftStepResult sft_step(PolicyParams& params, std::span<const Sample> batch, const Vocab& vocab,
                       const SftConfig& cfg, AdamState* adam) {
  cfg.validate();
  if (batch.empty()) throw std::invalid_argument("sft_step needs a nonempty batch");
  SftStepResult result;
  std::vector<Episode> episodes;
  episodes.reserve(batch.size());
  for (const auto& s : batch) {
    if (s.context.size() != params.shape().context_dim) {
      throw std::invalid_argument("sample '" + s.id + "' has context size " +
                                  std::to_string(s.context.size()) + ", policy expects " +
                                  std::to_string(params.shape().context_dim));
    }
    try {
      episodes.push_back({s.context, encode_response(s.reasoning, s.trajectory, s.resolution,
                                                     vocab, cfg.include_reasoning)});
    } catch (const TokenizeError&) {
      result.skipped.push_back(s.id);
    }
  }
  if (episodes.empty()) throw std::invalid_argument("no tokenizable sample in the batch");

  const TeacherForcedPass pass(params, episodes);
  result.tokens = static_cast<std::size_t>(pass.columns());
  const double scale = 1.0 / static_cast<double>(result.tokens);
  double total = 0.0;
  std::vector<Eigen::VectorXd> weights;
  weights.reserve(episodes.size());
  for (std::size_t e = 0; e < episodes.size(); ++e) {
    const Eigen::VectorXd lp = pass.realized_logprobs(e);
    total += lp.sum();
    weights.push_back(Eigen::VectorXd::Constant(lp.size(), -scale));
  }
  result.loss = -total * scale;
  if (!std::isfinite(result.loss)) {
    throw TrainingError("non-finite SFT loss", {{"loss", result.loss}});
  }

  Eigen::VectorXd g = pass.backward(weights).values();
  clip_norm(g, cfg.max_grad_norm);
  Eigen::VectorXd& theta = params.values();
  const Eigen::VectorXd decay = cfg.learning_rate * cfg.weight_decay * theta;
  if (cfg.optimizer == Optimizer::Adam) {
    if (!adam) throw std::invalid_argument("adam optimizer needs optimizer state");
    constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    if (adam->m.size() != theta.size()) {
      adam->m = Eigen::VectorXd::Zero(theta.size());
      adam->v = Eigen::VectorXd::Zero(theta.size());
      adam->step = 0;
    }
    ++adam->step;
    adam->m = b1 * adam->m + (1 - b1) * g;
    adam->v = b2 * adam->v + (1 - b2) * g.cwiseAbs2();
    const double c1 = 1 - std::pow(b1, static_cast<double>(adam->step));
    const double c2 = 1 - std::pow(b2, static_cast<double>(adam->step));
    theta -= cfg.learning_rate *
             ((adam->m / c1).array() / ((adam->v / c2).array().sqrt() + eps)).matrix();
  } else {
    theta -= cfg.learning_rate * g;
  }
  theta -= decay;
  return result;
}

SftResult train_sft(PolicyParams& params, std::span<const Sample> data, const Vocab& vocab,
                    const SftConfig& cfg, const MetricsSink& sink) {
  cfg.validate();
  SftResult result;
  AdamState adam;
  long step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto order = shuffled(data.size(), derive_rng(cfg.seed, 0x5f7, epoch));
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      std::vector<Sample> batch;
      batch.reserve(end - start);
      for (std::size_t k = start; k < end; ++k) batch.push_back(data[order[k]]);
      const auto r = sft_step(params, batch, vocab, cfg, &adam);
      result.losses.push_back(r.loss);
      if (epoch == 0) {
        result.skipped.insert(result.skipped.end(), r.skipped.begin(), r.skipped.end());
      }
      if (sink) {
        sink({{"step", step}, {"epoch", epoch}, {"loss", r.loss}, {"tokens", r.tokens}});
      }
      ++step;
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Reinforcement phase

void RftConfig::validate() const {
  if (group_size < 2) {
    throw std::invalid_argument("group_size must be at least 2 for group-relative advantages");
  }
  if (!(kl_coeff >= 0)) throw std::invalid_argument("kl_coeff must be >= 0");
  if (!(clip_eps > 0 && clip_eps < 1)) throw std::invalid_argument("clip_eps must be in (0, 1)");
  if (batch_size == 0 || mini_batch == 0) {
    throw std::invalid_argument("batch_size and mini_batch must be positive");
  }
  if (!(learning_rate >= 0)) throw std::invalid_argument("rft learning_rate must be >= 0");
  if (!(std_floor >= 0)) throw std::invalid_argument("std_floor must be >= 0");
  if (inner_epochs < 1) throw std::invalid_argument("inner_epochs must be positive");
  if (epochs < 0) throw std::invalid_argument("rft epochs must be >= 0");
  if (!(max_grad_norm >= 0)) throw std::invalid_argument("rft max_grad_norm must be >= 0");
}

Eigen::VectorXd group_advantages(const Eigen::VectorXd& rewards, double std_floor) {
  if (rewards.size() < 2) {
    throw std::invalid_argument("group advantages need at least two rewards");
  }
  const double mean = rewards.mean();
  const double sd = std::sqrt((rewards.array() - mean).square().mean());
  // NaN rewards fall through and surface as a non-finite objective.
  if (sd < std_floor || sd == 0.0) return Eigen::VectorXd::Zero(rewards.size());
  return (rewards.array() - mean) / sd;
}

GrpoResult grpo_loss(std::span<const GroupRollout> groups, const PolicyParams& theta,
                     const PolicyParams& ref, const RftConfig& cfg) {
  cfg.validate();
  if (!(theta.shape() == ref.shape())) {
    throw std::invalid_argument("theta and reference policies differ in shape");
  }
  std::vector<Episode> episodes;
  for (const auto& g : groups) {
    for (const auto& r : g.responses) {
      if (r.old_logprobs.size() != static_cast<Eigen::Index>(r.tokens.size())) {
        throw std::invalid_argument("rollout has " + std::to_string(r.tokens.size()) +
                                    " tokens but " + std::to_string(r.old_logprobs.size()) +
                                    " old log-probabilities");
      }
      episodes.push_back({g.context, r.tokens});
    }
  }
  GrpoResult out;
  out.gradient = PolicyParams(theta.shape());
  if (episodes.empty()) return out;

  const TeacherForcedPass cur(theta, episodes);
  const TeacherForcedPass base(ref, episodes);
  const bool full = cfg.kl_mode == KlMode::FullVocabulary;
  const double n_groups = static_cast<double>(groups.size());
  const double lo = 1.0 - cfg.clip_eps, hi = 1.0 + cfg.clip_eps;

  std::vector<Eigen::VectorXd> weights;
  weights.reserve(episodes.size());
  Eigen::MatrixXd kl_dlogits;
  if (full) kl_dlogits = Eigen::MatrixXd::Zero(theta.shape().vocab, cur.columns());
  double kl_sum = 0.0;
  std::size_t clipped = 0;
  std::size_t e = 0;
  for (const auto& g : groups) {
    const double g_size = static_cast<double>(g.responses.size());
    for (const auto& r : g.responses) {
      const Eigen::VectorXd lp = cur.realized_logprobs(e);
      const Eigen::VectorXd lp_ref = base.realized_logprobs(e);
      const Eigen::Index n = lp.size();
      Eigen::VectorXd w = Eigen::VectorXd::Zero(n);
      if (n > 0) {
        const double c = 1.0 / (n_groups * g_size * static_cast<double>(n));
        const double a = r.advantage;
        double term = 0.0;
        for (Eigen::Index t = 0; t < n; ++t) {
          const double ratio = std::exp(lp(t) - r.old_logprobs(t));
          const double unclipped = ratio * a;
          const double clipped_obj = std::clamp(ratio, lo, hi) * a;
          if (std::abs(ratio - 1.0) > cfg.clip_eps) ++clipped;
          // Only the unclipped branch depends on theta.
          const double surrogate_grad = unclipped <= clipped_obj ? unclipped : 0.0;
          double kl = 0.0;
          if (full) {
            const auto p_log = cur.logprobs(e).col(t);
            const auto q_log = base.logprobs(e).col(t);
            const Eigen::ArrayXd p = p_log.array().exp();
            kl = (p * (p_log - q_log).array()).sum();
            kl_dlogits.col(cur.column_offset(e) + t) =
                (-cfg.kl_coeff * c) * (p * ((p_log - q_log).array() - kl)).matrix();
            w(t) = c * surrogate_grad;
          } else {
            kl = kl_per_token(lp(t), lp_ref(t));
            w(t) = c * (surrogate_grad - cfg.kl_coeff * (1.0 - std::exp(lp_ref(t) - lp(t))));
          }
          kl_sum += kl;
          term += std::min(unclipped, clipped_obj) - cfg.kl_coeff * kl;
        }
        out.objective += c * term;
        out.tokens += static_cast<std::size_t>(n);
      }
      weights.push_back(std::move(w));
      ++e;
    }
  }
  out.gradient = cur.backward(weights);
  if (full) out.gradient.values() += cur.backward_from_logits(kl_dlogits).values();
  if (out.tokens > 0) {
    out.mean_kl = kl_sum / static_cast<double>(out.tokens);
    out.clip_fraction = static_cast<double>(clipped) / static_cast<double>(out.tokens);
  }
  return out;
}

RewardFn make_reward_fn(const Vocab& vocab, const RewardOptions& options) {
  return [vocab, options](std::span<const TokenId> tokens, const Sample& s) {
    return total_reward(render_response(tokens, s.resolution, vocab), s.trajectory, s.resolution,
                        options);
  };
}

nlohmann::json RftStep::to_json() const {
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(); };
  return {{"step", step},
          {"batch", batch},
          {"mean_reward", num(mean_reward)},
          {"mean_kl", num(mean_kl)},
          {"clip_fraction", num(clip_fraction)},
          {"ade", num(ade)},
          {"fde", num(fde)}};
}

RftResult train_rft(const PolicyParams& params_sft, std::span<const Sample> prompts,
                    const Vocab& vocab, const RftConfig& cfg, const SamplingConfig& sampling,
                    const RewardFn& reward_fn, const MetricsSink& sink) {
  cfg.validate();
  sampling.validate();
  if (!reward_fn) throw std::invalid_argument("train_rft needs a reward function");
  for (const auto& s : prompts) {
    if (s.context.size() != params_sft.shape().context_dim) {
      throw std::invalid_argument("prompt '" + s.id + "' has the wrong context size");
    }
  }
  const PolicyParams ref = params_sft;
  RftResult result{params_sft, {}};
  PolicyParams& theta = result.params;
  const auto G = static_cast<std::size_t>(cfg.group_size);
  long step = 0, batch_index = 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto order = shuffled(prompts.size(), derive_rng(cfg.seed, 0x7a1, epoch));
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++batch_index) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const PolicyParams old = theta;

      std::vector<Eigen::VectorXd> contexts;
      std::vector<Rng> rngs;
      for (std::size_t k = start; k < end; ++k) {
        for (std::size_t i = 0; i < G; ++i) {
          contexts.push_back(prompts[order[k]].context);
          rngs.push_back(derive_rng(sampling.seed, static_cast<std::uint64_t>(batch_index),
                                    order[k], i));
        }
      }
      const auto rollouts = sample_batch(old, contexts, vocab, sampling, rngs);

      std::vector<GroupRollout> groups;
      groups.reserve(end - start);
      for (std::size_t k = start; k < end; ++k) {
        const Sample& s = prompts[order[k]];
        GroupRollout g{s.context, {}};
        Eigen::VectorXd rewards(cfg.group_size);
        for (std::size_t i = 0; i < G; ++i) {
          ScoredRollout r;
          r.tokens = rollouts[(k - start) * G + i].tokens;
          r.reward = reward_fn(r.tokens, s);
          rewards(static_cast<Eigen::Index>(i)) = r.reward.r_total;
          g.responses.push_back(std::move(r));
        }
        const Eigen::VectorXd adv = group_advantages(rewards, cfg.std_floor);
        for (std::size_t i = 0; i < G; ++i) {
          g.responses[i].advantage = adv(static_cast<Eigen::Index>(i));
        }
        groups.push_back(std::move(g));
      }

      // Old log-probabilities from the same teacher-forced computation the
      // loss uses, so an untouched policy has ratio exactly 1.
      std::vector<std::span<GroupRollout>> minis;
      for (std::size_t m = 0; m < groups.size(); m += cfg.mini_batch) {
        const std::size_t len = std::min(cfg.mini_batch, groups.size() - m);
        std::span<GroupRollout> mb(groups.data() + m, len);
        std::vector<Episode> episodes;
        for (const auto& g : mb) {
          for (const auto& r : g.responses) episodes.push_back({g.context, r.tokens});
        }
        const TeacherForcedPass pass(old, episodes);
        std::size_t e = 0;
        for (auto& g : mb) {
          for (auto& r : g.responses) r.old_logprobs = pass.realized_logprobs(e++);
        }
        minis.push_back(mb);
      }

      for (int inner = 0; inner < cfg.inner_epochs; ++inner) {
        for (const auto& mb : minis) {
          GrpoResult res = grpo_loss(mb, theta, ref, cfg);
          if (!std::isfinite(res.objective) || !res.gradient.values().allFinite()) {
            throw TrainingError("non-finite GRPO objective at step " + std::to_string(step),
                                {{"step", step}, {"objective", res.objective},
                                 {"groups", group_dump(mb)}});
          }
          Eigen::VectorXd& g = res.gradient.values();
          clip_norm(g, cfg.max_grad_norm);
          theta.values() += cfg.learning_rate * g;

          RftStep rec;
          rec.step = step;
          rec.batch = batch_index;
          rec.mean_kl = res.mean_kl;
          rec.clip_fraction = res.clip_fraction;
          double reward_sum = 0.0, ade_sum = 0.0, fde_sum = 0.0;
          std::size_t count = 0, valid = 0;
          for (const auto& grp : mb) {
            for (const auto& r : grp.responses) {
              reward_sum += r.reward.r_total;
              ++count;
              if (r.reward.verdict.valid()) {
                ade_sum += r.reward.ade;
                fde_sum += r.reward.fde;
                ++valid;
              }
            }
          }
          rec.mean_reward = count ? reward_sum / static_cast<double>(count) : 0.0;
          const double nan = std::numeric_limits<double>::quiet_NaN();
          rec.ade = valid ? ade_sum / static_cast<double>(valid) : nan;
          rec.fde = valid ? fde_sum / static_cast<double>(valid) : nan;
          if (sink) sink(rec.to_json());
          result.steps.push_back(rec);
          ++step;
        }
      }
    }
  }
  return result;
}

}  // namespace planlab
