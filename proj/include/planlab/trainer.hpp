#pragma once

#include "planlab/datakit.hpp"
#include "planlab/policy.hpp"
#include "planlab/rewards.hpp"

#include <Eigen/Core>
#include <json.hpp>

#include <cmath>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace planlab {

class TrainingError : public std::runtime_error {
 public:
  TrainingError(const std::string& message, nlohmann::json dump)
      : std::runtime_error(message), dump_(std::move(dump)) {}
  const nlohmann::json& dump() const { return dump_; }

 private:
  nlohmann::json dump_;
};

enum class Optimizer { Sgd, Adam };

std::string_view to_string(Optimizer o);
Optimizer optimizer_from_string(std::string_view s);

// First and second moment estimates for Adam; sized lazily.
struct AdamState {
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  long step = 0;
};

struct SftConfig {
  std::size_t batch_size = 128;
  double learning_rate = 1e-5;
  double weight_decay = 0.1;
  int epochs = 1;
  Optimizer optimizer = Optimizer::Sgd;
  double max_grad_norm = 0.0;  // 0 disables clipping
  bool include_reasoning = true;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SftStepResult {
  double loss = 0.0;  // mean per-token negative log-likelihood
  std::size_t tokens = 0;
  std::vector<std::string> skipped;  // ids that could not be tokenized
};

// One descent step on the mean token NLL of the batch, with decoupled weight
// decay: theta -= lr * (update + weight_decay * theta).
SftStepResult sft_step(PolicyParams& params, std::span<const Sample> batch, const Vocab& vocab,
                       const SftConfig& cfg, AdamState* adam = nullptr);

using MetricsSink = std::function<void(const nlohmann::json&)>;

struct SftResult {
  std::vector<double> losses;
  std::vector<std::string> skipped;
};

SftResult train_sft(PolicyParams& params, std::span<const Sample> data, const Vocab& vocab,
                    const SftConfig& cfg, const MetricsSink& sink = {});

enum class KlMode { Estimator, FullVocabulary };

struct RftConfig {
  int group_size = 4;
  double kl_coeff = 0.04;
  double clip_eps = 0.2;
  std::size_t batch_size = 128;  // prompts per rollout batch
  std::size_t mini_batch = 4;    // groups per optimizer step
  double learning_rate = 5e-6;
  double std_floor = 1e-8;
  // Passes over each rollout batch before the old policy is refreshed.
  int inner_epochs = 1;
  int epochs = 1;
  double max_grad_norm = 0.0;  // 0 disables clipping
  KlMode kl_mode = KlMode::Estimator;
  std::uint64_t seed = 0;

  void validate() const;
};

struct ScoredRollout {
  TokenSeq tokens;
  Eigen::VectorXd old_logprobs;  // realized tokens under the sampling policy
  RewardBreakdown reward;
  double advantage = 0.0;
};

struct GroupRollout {
  Eigen::VectorXd context;
  std::vector<ScoredRollout> responses;
};

// (R_i - mean) / std with the population std; all zeros when std < std_floor.
Eigen::VectorXd group_advantages(const Eigen::VectorXd& rewards, double std_floor = 1e-8);

// exp(ref - theta) - (ref - theta) - 1, non-negative.
inline double kl_per_token(double logp_theta, double logp_ref) {
  const double d = logp_ref - logp_theta;
  return std::exp(d) - d - 1.0;
}

struct GrpoResult {
  double objective = 0.0;
  PolicyParams gradient;  // ascent direction of the objective
  double mean_kl = 0.0;
  double clip_fraction = 0.0;  // tokens with |ratio - 1| > eps
  std::size_t tokens = 0;
};

// Clipped surrogate with group-relative advantages, each response
// length-normalized, averaged over groups and responses, minus the KL
// penalty against the reference policy. Ratios use each rollout's recorded
// old log-probabilities.
GrpoResult grpo_loss(std::span<const GroupRollout> groups, const PolicyParams& theta,
                     const PolicyParams& ref, const RftConfig& cfg);

using RewardFn = std::function<RewardBreakdown(std::span<const TokenId>, const Sample&)>;

// Renders the tokens to text and scores them with total_reward.
RewardFn make_reward_fn(const Vocab& vocab, const RewardOptions& options);

struct RftStep {
  long step = 0;
  long batch = 0;
  double mean_reward = 0.0;
  double mean_kl = 0.0;
  double clip_fraction = 0.0;
  double ade = 0.0;  // over parseable rollouts, in the reward's coordinate units
  double fde = 0.0;

  nlohmann::json to_json() const;
};

struct RftResult {
  PolicyParams params;
  std::vector<RftStep> steps;
};

// params_sft also serves as the frozen reference policy.
RftResult train_rft(const PolicyParams& params_sft, std::span<const Sample> prompts,
                    const Vocab& vocab, const RftConfig& cfg, const SamplingConfig& sampling,
                    const RewardFn& reward_fn, const MetricsSink& sink = {});

}  // namespace planlab
