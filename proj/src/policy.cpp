#include "planlab/policy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <sstream>

namespace planlab {
namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double uniform01(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

void log_softmax_columns(Eigen::MatrixXd& m) {
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    auto col = m.col(j);
    const double mx = col.maxCoeff();
    const double lse = mx + std::log((col.array() - mx).exp().sum());
    col.array() -= lse;
  }
}

// Hidden pre-activations for one step of every listed rollout.
Eigen::MatrixXd step_hidden(const PolicyParams& params, const Eigen::MatrixXd& base,
                            std::span<const int> rows, std::span<const int> positions,
                            std::span<const TokenId> prev) {
  const auto P = params.position();
  const auto E = params.embedding();
  const auto alpha = params.mixing();
  Eigen::MatrixXd a(params.shape().hidden, static_cast<Eigen::Index>(rows.size()));
  for (std::size_t k = 0; k < rows.size(); ++k) {
    a.col(static_cast<Eigen::Index>(k)) =
        base.col(rows[k]) + P.col(positions[k]) + alpha(positions[k]) * E.col(prev[k]);
  }
  return a.array().tanh().matrix();
}

Eigen::MatrixXd step_logits(const PolicyParams& params, const Eigen::MatrixXd& hidden) {
  Eigen::MatrixXd logits = params.output_weight() * hidden;
  logits.colwise() += params.output_bias();
  return logits;
}

Eigen::MatrixXd context_base(const PolicyParams& params,
                             std::span<const Eigen::VectorXd> contexts) {
  const int d = params.shape().context_dim;
  Eigen::MatrixXd c(d, static_cast<Eigen::Index>(contexts.size()));
  for (std::size_t i = 0; i < contexts.size(); ++i) {
    if (contexts[i].size() != d) {
      throw std::invalid_argument("context has " + std::to_string(contexts[i].size()) +
                                  " features, policy expects " + std::to_string(d));
    }
    c.col(static_cast<Eigen::Index>(i)) = contexts[i];
  }
  Eigen::MatrixXd base = params.input_weight() * c;
  base.colwise() += params.input_bias();
  return base;
}

struct Candidate {
  double p;
  TokenId id;
};

// Draws one token from adjusted logits; `emitted` flags already-chosen ids.
TokenId draw_token(const Eigen::Ref<const Eigen::VectorXd>& logits,
                   const std::vector<char>& emitted, const SamplingConfig& cfg, Rng& rng,
                   std::vector<Candidate>& scratch) {
  const Eigen::Index v = logits.size();
  Eigen::VectorXd l = logits / cfg.temperature;
  if (cfg.repetition_penalty != 1.0) {
    for (Eigen::Index i = 0; i < v; ++i) {
      if (emitted[static_cast<std::size_t>(i)]) {
        l(i) = l(i) > 0.0 ? l(i) / cfg.repetition_penalty : l(i) * cfg.repetition_penalty;
      }
    }
  }
  const double mx = l.maxCoeff();
  Eigen::VectorXd p = (l.array() - mx).exp().matrix();
  p /= p.sum();

  const double u = uniform01(rng);
  TokenId chosen = static_cast<TokenId>(v - 1);
  if (cfg.top_p >= 1.0) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < v; ++i) {
      acc += p(i);
      if (u < acc) {
        chosen = static_cast<TokenId>(i);
        break;
      }
    }
  } else {
    scratch.resize(static_cast<std::size_t>(v));
    for (Eigen::Index i = 0; i < v; ++i) {
      scratch[static_cast<std::size_t>(i)] = {p(i), static_cast<TokenId>(i)};
    }
    const auto before = [](const Candidate& a, const Candidate& b) {
      return a.p > b.p || (a.p == b.p && a.id < b.id);
    };
    // Grow the sorted head until it holds top_p of the mass.
    std::size_t k = std::min<std::size_t>(16, scratch.size());
    std::size_t keep = scratch.size();
    double mass = 0.0;
    while (true) {
      std::partial_sort(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(k),
                        scratch.end(), before);
      mass = 0.0;
      bool reached = false;
      for (std::size_t i = 0; i < k; ++i) {
        mass += scratch[i].p;
        if (mass >= cfg.top_p) {
          keep = i + 1;
          reached = true;
          break;
        }
      }
      if (reached || k == scratch.size()) {
        if (!reached) keep = k;
        break;
      }
      k = std::min(k * 4, scratch.size());
    }
    const double target = u * mass;
    double acc = 0.0;
    chosen = scratch[keep - 1].id;
    for (std::size_t i = 0; i < keep; ++i) {
      acc += scratch[i].p;
      if (target < acc) {
        chosen = scratch[i].id;
        break;
      }
    }
  }
  if (cfg.corruption_prob > 0.0 && uniform01(rng) < cfg.corruption_prob) {
    chosen = std::uniform_int_distribution<TokenId>(0, static_cast<TokenId>(v - 1))(rng);
  }
  return chosen;
}

}  // namespace

// ---------------------------------------------------------------------------
// Vocab

Vocab::Vocab(int grid_size, int n_waypoints, std::vector<std::string> words)
    : grid_size_(grid_size), n_waypoints_(n_waypoints), words_(std::move(words)) {
  if (grid_size_ < 2) throw std::invalid_argument("grid size must be at least 2");
  if (n_waypoints_ < 1) throw std::invalid_argument("need at least one waypoint");
  for (std::size_t i = 0; i < words_.size(); ++i) {
    if (words_[i].empty() || words_[i].find_first_of(" \t\n<>") != std::string::npos) {
      throw std::invalid_argument("vocabulary word '" + words_[i] + "' is not a plain token");
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (words_[i] == words_[j]) throw std::invalid_argument("duplicate word " + words_[i]);
    }
  }
}

const std::vector<std::string>& Vocab::default_words() {
  static const std::vector<std::string> words = {
      "clear", "cones", "barrier", "worker", "vehicle", "debris", "left",
      "right", "ahead", "keep",  "straight", "turn"};
  return words;
}

TokenId Vocab::cell_token(int cx, int cy) const {
  if (cx < 0 || cy < 0 || cx >= grid_size_ || cy >= grid_size_) {
    throw std::out_of_range("cell outside the grid");
  }
  return cy * grid_size_ + cx;
}

std::pair<int, int> Vocab::cell(TokenId token) const {
  if (!is_waypoint(token)) throw std::out_of_range("not a waypoint token");
  return {token % grid_size_, token / grid_size_};
}

std::optional<TokenId> Vocab::word_token(std::string_view word) const {
  for (std::size_t i = 0; i < words_.size(); ++i) {
    if (words_[i] == word) return word_base() + static_cast<TokenId>(i);
  }
  return std::nullopt;
}

const std::string& Vocab::word(TokenId token) const {
  if (!is_word(token)) throw std::out_of_range("not a word token");
  return words_[static_cast<std::size_t>(token - word_base())];
}

TokenSeq tokenize(const Trajectory& traj, Resolution res, const Vocab& vocab, int* clamped) {
  const int k = vocab.grid_size();
  const double cw = res.width / k;
  const double ch = res.height / k;
  int n_clamped = 0;
  TokenSeq out;
  out.reserve(static_cast<std::size_t>(traj.cols()));
  for (Eigen::Index i = 0; i < traj.cols(); ++i) {
    const double x = traj(0, i);
    const double y = traj(1, i);
    if (!std::isfinite(x) || !std::isfinite(y)) {
      throw TokenizeError("trajectory has non-finite coordinates");
    }
    if (x < 0.0 || x > res.width || y < 0.0 || y > res.height) ++n_clamped;
    const int cx = std::clamp(static_cast<int>(std::floor(x / cw)), 0, k - 1);
    const int cy = std::clamp(static_cast<int>(std::floor(y / ch)), 0, k - 1);
    out.push_back(vocab.cell_token(cx, cy));
  }
  if (clamped) *clamped = n_clamped;
  return out;
}

Trajectory detokenize(std::span<const TokenId> tokens, Resolution res, const Vocab& vocab) {
  const double cw = res.width / vocab.grid_size();
  const double ch = res.height / vocab.grid_size();
  Trajectory out(2, static_cast<Eigen::Index>(tokens.size()));
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const auto [cx, cy] = vocab.cell(tokens[i]);
    out.col(static_cast<Eigen::Index>(i)) << (cx + 0.5) * cw, (cy + 0.5) * ch;
  }
  return out;
}

TokenSeq encode_response(std::string_view reasoning, const Trajectory& traj, Resolution res,
                         const Vocab& vocab, bool include_reasoning) {
  if (traj.cols() != vocab.n_waypoints()) {
    throw TokenizeError("trajectory has " + std::to_string(traj.cols()) + " points, expected " +
                        std::to_string(vocab.n_waypoints()));
  }
  TokenSeq out;
  out.push_back(vocab.think_open());
  if (include_reasoning) {
    std::istringstream words{std::string(reasoning)};
    std::string w;
    while (words >> w) {
      const auto id = vocab.word_token(w);
      if (!id) throw TokenizeError("reasoning word '" + w + "' is not in the vocabulary");
      out.push_back(*id);
    }
  }
  out.push_back(vocab.think_close());
  out.push_back(vocab.answer_open());
  const TokenSeq cells = tokenize(traj, res, vocab);
  out.insert(out.end(), cells.begin(), cells.end());
  out.push_back(vocab.answer_close());
  out.push_back(vocab.eos());
  return out;
}

std::string render_response(std::span<const TokenId> tokens, Resolution res,
                            const Vocab& vocab) {
  std::string out;
  TokenId prev = vocab.bos();
  char buf[64];
  for (TokenId t : tokens) {
    if (t == vocab.eos()) break;
    if (vocab.is_waypoint(t)) {
      const Trajectory p = detokenize(std::span<const TokenId>(&t, 1), res, vocab);
      std::snprintf(buf, sizeof(buf), "%s{'x': %.2f, 'y': %.2f}",
                    vocab.is_waypoint(prev) ? ", " : "", p(0, 0), p(1, 0));
      out += buf;
    } else if (vocab.is_word(t)) {
      if (vocab.is_word(prev)) out += ' ';
      out += vocab.word(t);
    } else if (t == vocab.think_open()) {
      out += "<think>";
    } else if (t == vocab.think_close()) {
      out += "</think>";
    } else if (t == vocab.answer_open()) {
      out += "<answer>[";
    } else if (t == vocab.answer_close()) {
      out += "]</answer>";
    }
    prev = t;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Parameters

PolicyShape PolicyShape::for_vocab(const Vocab& vocab, int context_dim, int hidden,
                                   int max_len) {
  return PolicyShape{context_dim, hidden, vocab.size(), max_len};
}

PolicyParams::PolicyParams(const PolicyShape& shape) : shape_(shape) {
  if (shape.context_dim < 1 || shape.hidden < 1 || shape.vocab < 2 || shape.max_len < 1) {
    throw std::invalid_argument("invalid policy shape");
  }
  const auto info = layout();
  values_ = Eigen::VectorXd::Zero(info.back().offset + info.back().rows * info.back().cols);
}

std::vector<PolicyParams::TensorInfo> PolicyParams::layout() const {
  const Eigen::Index d = shape_.context_dim, h = shape_.hidden, v = shape_.vocab,
                     t = shape_.max_len;
  std::vector<TensorInfo> out = {
      {"input_weight", 0, h, d}, {"input_bias", 0, h, 1},        {"position", 0, h, t},
      {"mixing", 0, t, 1},       {"embedding", 0, h, v + 1},     {"output_weight", 0, v, h},
      {"output_bias", 0, v, 1},
  };
  Eigen::Index off = 0;
  for (auto& ti : out) {
    ti.offset = off;
    off += ti.rows * ti.cols;
  }
  return out;
}

PolicyParams::MatrixMap PolicyParams::mat(int i) {
  const auto ti = layout()[static_cast<std::size_t>(i)];
  return MatrixMap(values_.data() + ti.offset, ti.rows, ti.cols);
}
PolicyParams::ConstMatrixMap PolicyParams::mat(int i) const {
  const auto ti = layout()[static_cast<std::size_t>(i)];
  return ConstMatrixMap(values_.data() + ti.offset, ti.rows, ti.cols);
}
PolicyParams::VectorMap PolicyParams::vec(int i) {
  const auto ti = layout()[static_cast<std::size_t>(i)];
  return VectorMap(values_.data() + ti.offset, ti.rows);
}
PolicyParams::ConstVectorMap PolicyParams::vec(int i) const {
  const auto ti = layout()[static_cast<std::size_t>(i)];
  return ConstVectorMap(values_.data() + ti.offset, ti.rows);
}

PolicyParams PolicyParams::random(const PolicyShape& shape, std::uint64_t seed) {
  PolicyParams p(shape);
  Rng rng = derive_rng(seed, 0x5eed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto fill = [&](auto&& m, double scale) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = scale * normal(rng);
    }
  };
  fill(p.input_weight(), 1.0 / std::sqrt(static_cast<double>(shape.context_dim)));
  fill(p.position(), 0.1);
  p.mixing().setOnes();
  fill(p.embedding(), 0.1);
  fill(p.output_weight(), 0.01);
  return p;
}

// ---------------------------------------------------------------------------
// Teacher-forced pass

TeacherForcedPass::TeacherForcedPass(const PolicyParams& params,
                                     std::span<const Episode> episodes)
    : params_(params) {
  const auto& shape = params.shape();
  const TokenId bos = shape.vocab;
  offsets_.push_back(0);
  std::vector<Eigen::VectorXd> ctx;
  ctx.reserve(episodes.size());
  for (std::size_t e = 0; e < episodes.size(); ++e) {
    const auto& ep = episodes[e];
    if (static_cast<int>(ep.tokens.size()) > shape.max_len) {
      throw std::invalid_argument("episode longer than the policy's max_len");
    }
    TokenId prev = bos;
    for (std::size_t t = 0; t < ep.tokens.size(); ++t) {
      const TokenId tok = ep.tokens[t];
      if (tok < 0 || tok >= shape.vocab) throw std::out_of_range("token outside vocabulary");
      position_.push_back(static_cast<int>(t));
      prev_.push_back(prev);
      target_.push_back(tok);
      episode_of_.push_back(static_cast<int>(e));
      prev = tok;
    }
    offsets_.push_back(offsets_.back() + static_cast<Eigen::Index>(ep.tokens.size()));
    ctx.push_back(ep.context);
  }
  const Eigen::MatrixXd base = context_base(params, ctx);
  contexts_.resize(shape.context_dim, static_cast<Eigen::Index>(ctx.size()));
  for (std::size_t e = 0; e < ctx.size(); ++e) contexts_.col(static_cast<Eigen::Index>(e)) = ctx[e];
  hidden_ = step_hidden(params, base, episode_of_, position_, prev_);
  logp_ = step_logits(params, hidden_);
  log_softmax_columns(logp_);
}

Eigen::VectorXd TeacherForcedPass::realized_logprobs(std::size_t i) const {
  const Eigen::Index begin = offsets_[i];
  const Eigen::Index n = offsets_[i + 1] - begin;
  Eigen::VectorXd out(n);
  for (Eigen::Index t = 0; t < n; ++t) {
    out(t) = logp_(target_[static_cast<std::size_t>(begin + t)], begin + t);
  }
  return out;
}

Eigen::Block<const Eigen::MatrixXd, Eigen::Dynamic, Eigen::Dynamic, true> TeacherForcedPass::logprobs(
    std::size_t i) const {
  return logp_.middleCols(offsets_[i], offsets_[i + 1] - offsets_[i]);
}

PolicyParams TeacherForcedPass::backward(std::span<const Eigen::VectorXd> token_weights) const {
  if (token_weights.size() != episodes()) {
    throw std::invalid_argument("one weight vector per episode required");
  }
  Eigen::VectorXd w(logp_.cols());
  for (std::size_t e = 0; e < episodes(); ++e) {
    const Eigen::Index n = offsets_[e + 1] - offsets_[e];
    if (token_weights[e].size() != n) {
      throw std::invalid_argument("token weights do not match episode length");
    }
    w.segment(offsets_[e], n) = token_weights[e];
  }
  // d log p(target) / d logits = onehot(target) - softmax.
  Eigen::MatrixXd dlogits = -(logp_.array().exp().rowwise() * w.transpose().array()).matrix();
  for (Eigen::Index j = 0; j < logp_.cols(); ++j) {
    dlogits(target_[static_cast<std::size_t>(j)], j) += w(j);
  }
  return backward_from_logits(dlogits);
}

PolicyParams TeacherForcedPass::backward_from_logits(const Eigen::MatrixXd& dlogits) const {
  PolicyParams grad(params_.shape());
  grad.output_weight().noalias() = dlogits * hidden_.transpose();
  grad.output_bias() = dlogits.rowwise().sum();
  Eigen::MatrixXd dz = params_.output_weight().transpose() * dlogits;
  const Eigen::MatrixXd da = (dz.array() * (1.0 - hidden_.array().square())).matrix();

  const auto E = params_.embedding();
  const auto alpha = params_.mixing();
  auto gP = grad.position();
  auto gE = grad.embedding();
  auto galpha = grad.mixing();
  Eigen::MatrixXd per_episode = Eigen::MatrixXd::Zero(da.rows(), contexts_.cols());
  for (Eigen::Index j = 0; j < da.cols(); ++j) {
    const auto k = static_cast<std::size_t>(j);
    const int t = position_[k];
    gP.col(t) += da.col(j);
    galpha(t) += da.col(j).dot(E.col(prev_[k]));
    gE.col(prev_[k]) += alpha(t) * da.col(j);
    per_episode.col(episode_of_[k]) += da.col(j);
  }
  grad.input_bias() = per_episode.rowwise().sum();
  grad.input_weight().noalias() = per_episode * contexts_.transpose();
  return grad;
}

Eigen::VectorXd token_logprobs(const PolicyParams& params, const Eigen::VectorXd& context,
                               std::span<const TokenId> prefix) {
  const auto& shape = params.shape();
  if (static_cast<int>(prefix.size()) >= shape.max_len) {
    throw std::invalid_argument("prefix reaches the policy's max_len");
  }
  const Eigen::MatrixXd base = context_base(params, std::span<const Eigen::VectorXd>(&context, 1));
  const int row = 0;
  const int pos = static_cast<int>(prefix.size());
  const TokenId prev = prefix.empty() ? static_cast<TokenId>(shape.vocab) : prefix.back();
  Eigen::MatrixXd logits = step_logits(
      params, step_hidden(params, base, std::span<const int>(&row, 1),
                          std::span<const int>(&pos, 1), std::span<const TokenId>(&prev, 1)));
  log_softmax_columns(logits);
  return logits.col(0);
}

PolicyParams grad_logprob(const PolicyParams& params, const Eigen::VectorXd& context,
                          std::span<const TokenId> tokens) {
  const Episode ep{context, TokenSeq(tokens.begin(), tokens.end())};
  const TeacherForcedPass pass(params, std::span<const Episode>(&ep, 1));
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(tokens.size()));
  return pass.backward(std::span<const Eigen::VectorXd>(&ones, 1));
}

// ---------------------------------------------------------------------------
// Decoding

void SamplingConfig::validate() const {
  if (!(top_p > 0.0 && top_p <= 1.0)) throw std::invalid_argument("top_p must be in (0, 1]");
  if (!(temperature > 0.0)) throw std::invalid_argument("temperature must be positive");
  if (!(repetition_penalty >= 1.0)) {
    throw std::invalid_argument("repetition_penalty must be at least 1");
  }
  if (max_len < 1) throw std::invalid_argument("max_len must be positive");
  if (!(corruption_prob >= 0.0 && corruption_prob <= 1.0)) {
    throw std::invalid_argument("corruption_prob must be in [0, 1]");
  }
}

std::vector<Rollout> sample_batch(const PolicyParams& params,
                                  std::span<const Eigen::VectorXd> contexts, const Vocab& vocab,
                                  const SamplingConfig& cfg, std::span<Rng> rngs) {
  cfg.validate();
  if (rngs.size() != contexts.size()) throw std::invalid_argument("one rng per rollout required");
  const int max_len = std::min(cfg.max_len, params.shape().max_len);
  const auto v = static_cast<std::size_t>(params.shape().vocab);
  const Eigen::MatrixXd base = context_base(params, contexts);

  std::vector<Rollout> out(contexts.size());
  std::vector<std::vector<char>> emitted(contexts.size(), std::vector<char>(v, 0));
  std::vector<int> active(contexts.size());
  std::iota(active.begin(), active.end(), 0);
  std::vector<Candidate> scratch;
  for (int pos = 0; pos < max_len && !active.empty(); ++pos) {
    std::vector<int> positions(active.size(), pos);
    std::vector<TokenId> prev(active.size());
    for (std::size_t k = 0; k < active.size(); ++k) {
      const auto& toks = out[static_cast<std::size_t>(active[k])].tokens;
      prev[k] = toks.empty() ? vocab.bos() : toks.back();
    }
    const Eigen::MatrixXd logits =
        step_logits(params, step_hidden(params, base, active, positions, prev));
    std::vector<int> still;
    for (std::size_t k = 0; k < active.size(); ++k) {
      const auto r = static_cast<std::size_t>(active[k]);
      const auto col = logits.col(static_cast<Eigen::Index>(k));
      const TokenId tok = draw_token(col, emitted[r], cfg, rngs[r], scratch);
      const double mx = col.maxCoeff();
      const double lse = mx + std::log((col.array() - mx).exp().sum());
      out[r].tokens.push_back(tok);
      out[r].logprobs.push_back(col(tok) - lse);
      emitted[r][static_cast<std::size_t>(tok)] = 1;
      if (tok != vocab.eos()) still.push_back(active[k]);
    }
    active = std::move(still);
  }
  return out;
}

Rollout sample_sequence(const PolicyParams& params, const Eigen::VectorXd& context,
                        const Vocab& vocab, const SamplingConfig& cfg, Rng& rng) {
  auto out = sample_batch(params, std::span<const Eigen::VectorXd>(&context, 1), vocab, cfg,
                          std::span<Rng>(&rng, 1));
  return std::move(out.front());
}

std::vector<TokenSeq> greedy_batch(const PolicyParams& params,
                                   std::span<const Eigen::VectorXd> contexts, const Vocab& vocab,
                                   int max_len) {
  max_len = std::min(max_len, params.shape().max_len);
  const Eigen::MatrixXd base = context_base(params, contexts);
  std::vector<TokenSeq> out(contexts.size());
  std::vector<int> active(contexts.size());
  std::iota(active.begin(), active.end(), 0);
  for (int pos = 0; pos < max_len && !active.empty(); ++pos) {
    std::vector<int> positions(active.size(), pos);
    std::vector<TokenId> prev(active.size());
    for (std::size_t k = 0; k < active.size(); ++k) {
      const auto& toks = out[static_cast<std::size_t>(active[k])];
      prev[k] = toks.empty() ? vocab.bos() : toks.back();
    }
    const Eigen::MatrixXd logits =
        step_logits(params, step_hidden(params, base, active, positions, prev));
    std::vector<int> still;
    for (std::size_t k = 0; k < active.size(); ++k) {
      Eigen::Index best = 0;
      logits.col(static_cast<Eigen::Index>(k)).maxCoeff(&best);
      auto& toks = out[static_cast<std::size_t>(active[k])];
      toks.push_back(static_cast<TokenId>(best));
      if (static_cast<TokenId>(best) != vocab.eos()) still.push_back(active[k]);
    }
    active = std::move(still);
  }
  return out;
}

TokenSeq greedy_decode(const PolicyParams& params, const Eigen::VectorXd& context,
                       const Vocab& vocab, int max_len) {
  auto out = greedy_batch(params, std::span<const Eigen::VectorXd>(&context, 1), vocab, max_len);
  return std::move(out.front());
}

Rng derive_rng(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  std::uint64_t state = seed;
  std::uint64_t h = splitmix64(state);
  for (std::uint64_t x : {a, b, c}) {
    state ^= x + 0x632be59bd9b4e019ULL + (h << 6) + (h >> 2);
    h = splitmix64(state);
  }
  return Rng(h);
}

}  // namespace planlab
