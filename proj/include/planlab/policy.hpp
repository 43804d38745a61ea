#pragma once

#include "planlab/geometry.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace planlab {

using TokenId = std::int32_t;
using TokenSeq = std::vector<TokenId>;
using Rng = std::mt19937_64;

class TokenizeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Token layout: [0, K*K) joint (x-cell, y-cell) waypoints, id = cy * K + cx;
// then <think>, </think>, <answer>, </answer>, <eos>; then reasoning words.
// The begin-of-sequence marker is size() and is never emitted.
class Vocab {
 public:
  explicit Vocab(int grid_size = 32, int n_waypoints = 20,
                 std::vector<std::string> words = default_words());

  static const std::vector<std::string>& default_words();

  int grid_size() const { return grid_size_; }
  int n_waypoints() const { return n_waypoints_; }
  int size() const { return word_base() + static_cast<int>(words_.size()); }
  TokenId bos() const { return size(); }

  TokenId cell_token(int cx, int cy) const;
  std::pair<int, int> cell(TokenId token) const;
  bool is_waypoint(TokenId t) const { return t >= 0 && t < grid_size_ * grid_size_; }
  bool is_word(TokenId t) const { return t >= word_base() && t < size(); }

  TokenId think_open() const { return grid_size_ * grid_size_; }
  TokenId think_close() const { return think_open() + 1; }
  TokenId answer_open() const { return think_open() + 2; }
  TokenId answer_close() const { return think_open() + 3; }
  TokenId eos() const { return think_open() + 4; }

  std::optional<TokenId> word_token(std::string_view word) const;
  const std::string& word(TokenId token) const;
  const std::vector<std::string>& words() const { return words_; }

 private:
  int word_base() const { return grid_size_ * grid_size_ + 5; }

  int grid_size_;
  int n_waypoints_;
  std::vector<std::string> words_;
};

// Pixel coordinates to cell tokens. Points outside the image clamp to the
// nearest cell; `clamped` receives how many did.
TokenSeq tokenize(const Trajectory& traj, Resolution res, const Vocab& vocab,
                  int* clamped = nullptr);

// Cell tokens to cell-center pixel coordinates.
Trajectory detokenize(std::span<const TokenId> tokens, Resolution res, const Vocab& vocab);

// Full templated target: <think> words </think> <answer> cells </answer> <eos>.
// With include_reasoning false the think block is left empty.
TokenSeq encode_response(std::string_view reasoning, const Trajectory& traj, Resolution res,
                         const Vocab& vocab, bool include_reasoning = true);

// Text rendering of any token sequence; canonical sequences render to
// exactly what serialize_response produces.
std::string render_response(std::span<const TokenId> tokens, Resolution res,
                            const Vocab& vocab);

struct PolicyShape {
  int context_dim = 16;
  int hidden = 64;
  int vocab = 0;  // output size; embeddings have one extra column for BOS
  int max_len = 40;

  static PolicyShape for_vocab(const Vocab& vocab, int context_dim = 16, int hidden = 64,
                               int max_len = 40);
  bool operator==(const PolicyShape&) const = default;
};

// All weights live in one contiguous vector; named tensors are views.
//
//   a_t     = W_in c + b_in + P[:, t] + alpha[t] * E[:, prev_t]
//   z_t     = tanh(a_t)
//   logit_t = W_out z_t + b_out
class PolicyParams {
 public:
  using MatrixMap = Eigen::Map<Eigen::MatrixXd>;
  using ConstMatrixMap = Eigen::Map<const Eigen::MatrixXd>;
  using VectorMap = Eigen::Map<Eigen::VectorXd>;
  using ConstVectorMap = Eigen::Map<const Eigen::VectorXd>;

  struct TensorInfo {
    std::string_view name;
    Eigen::Index offset;
    Eigen::Index rows;
    Eigen::Index cols;
  };

  PolicyParams() = default;
  explicit PolicyParams(const PolicyShape& shape);  // all zeros

  static PolicyParams random(const PolicyShape& shape, std::uint64_t seed);

  const PolicyShape& shape() const { return shape_; }
  Eigen::Index size() const { return values_.size(); }
  Eigen::VectorXd& values() { return values_; }
  const Eigen::VectorXd& values() const { return values_; }

  std::vector<TensorInfo> layout() const;

  MatrixMap input_weight() { return mat(0); }
  ConstMatrixMap input_weight() const { return mat(0); }
  VectorMap input_bias() { return vec(1); }
  ConstVectorMap input_bias() const { return vec(1); }
  MatrixMap position() { return mat(2); }
  ConstMatrixMap position() const { return mat(2); }
  VectorMap mixing() { return vec(3); }
  ConstVectorMap mixing() const { return vec(3); }
  MatrixMap embedding() { return mat(4); }
  ConstMatrixMap embedding() const { return mat(4); }
  MatrixMap output_weight() { return mat(5); }
  ConstMatrixMap output_weight() const { return mat(5); }
  VectorMap output_bias() { return vec(6); }
  ConstVectorMap output_bias() const { return vec(6); }

 private:
  MatrixMap mat(int i);
  ConstMatrixMap mat(int i) const;
  VectorMap vec(int i);
  ConstVectorMap vec(int i) const;

  PolicyShape shape_;
  Eigen::VectorXd values_;
};

// One conditioned token sequence; step t is predicted from tokens[0, t).
struct Episode {
  Eigen::VectorXd context;
  TokenSeq tokens;
};

// Teacher-forced forward pass over a batch of episodes, keeping what the
// backward pass needs.
class TeacherForcedPass {
 public:
  TeacherForcedPass(const PolicyParams& params, std::span<const Episode> episodes);

  std::size_t episodes() const { return offsets_.size() - 1; }
  // Log-probabilities of the realized tokens of episode i.
  Eigen::VectorXd realized_logprobs(std::size_t i) const;
  // Full log-probability columns (vocab x steps) of episode i.
  Eigen::Block<const Eigen::MatrixXd, Eigen::Dynamic, Eigen::Dynamic, true> logprobs(
      std::size_t i) const;
  Eigen::Index columns() const { return logp_.cols(); }
  Eigen::Index column_offset(std::size_t i) const { return offsets_[i]; }

  // Gradient of sum_i sum_t w[i][t] * log pi(token_it | ctx_i, prefix_it).
  PolicyParams backward(std::span<const Eigen::VectorXd> token_weights) const;
  // Gradient given d objective / d logits, one column per step.
  PolicyParams backward_from_logits(const Eigen::MatrixXd& dlogits) const;

 private:
  const PolicyParams& params_;
  Eigen::MatrixXd contexts_;  // context_dim x episodes
  std::vector<Eigen::Index> offsets_;
  std::vector<int> position_;
  std::vector<TokenId> prev_;
  std::vector<TokenId> target_;
  std::vector<int> episode_of_;
  Eigen::MatrixXd hidden_;  // tanh activations, hidden x columns
  Eigen::MatrixXd logp_;    // vocab x columns
};

// Log-probability vector over the vocabulary for the next token.
Eigen::VectorXd token_logprobs(const PolicyParams& params, const Eigen::VectorXd& context,
                               std::span<const TokenId> prefix);

// Exact gradient of sum_t log pi(tokens[t] | context, tokens[0, t)).
PolicyParams grad_logprob(const PolicyParams& params, const Eigen::VectorXd& context,
                          std::span<const TokenId> tokens);

struct SamplingConfig {
  double top_p = 0.95;
  double temperature = 1.2;
  double repetition_penalty = 1.2;
  int max_len = 40;
  std::uint64_t seed = 0;
  // Per-step probability of replacing the sampled token with a uniformly
  // random one. Used to produce malformed rollouts on purpose.
  double corruption_prob = 0.0;

  void validate() const;
};

struct Rollout {
  TokenSeq tokens;
  // Log-probabilities of the chosen tokens under the unmodified policy.
  std::vector<double> logprobs;
};

// Temperature, then repetition penalty on already-emitted tokens, then
// nucleus truncation. Stops after <eos> or max_len tokens.
Rollout sample_sequence(const PolicyParams& params, const Eigen::VectorXd& context,
                        const Vocab& vocab, const SamplingConfig& cfg, Rng& rng);

// Lock-step sampling of many rollouts; rollout i draws only from rngs[i].
std::vector<Rollout> sample_batch(const PolicyParams& params,
                                  std::span<const Eigen::VectorXd> contexts, const Vocab& vocab,
                                  const SamplingConfig& cfg, std::span<Rng> rngs);

TokenSeq greedy_decode(const PolicyParams& params, const Eigen::VectorXd& context,
                       const Vocab& vocab, int max_len);

std::vector<TokenSeq> greedy_batch(const PolicyParams& params,
                                   std::span<const Eigen::VectorXd> contexts, const Vocab& vocab,
                                   int max_len);

// Derives an independent stream for (seed, a, b, c) via splitmix64.
Rng derive_rng(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0);

}  // namespace planlab
