#include "planlab/trainer.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

namespace {

using planlab::GroupRollout;
using planlab::PolicyParams;
using planlab::PolicyShape;
using planlab::RftConfig;
using planlab::ScoredRollout;
using planlab::TokenSeq;
using planlab::Vocab;

Eigen::VectorXd random_vector(std::uint64_t seed, int n, double scale = 1.0) {
  auto rng = planlab::derive_rng(seed, 5);
  std::normal_distribution<double> d(0.0, scale);
  Eigen::VectorXd v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

// Independent per-prefix evaluation of the clipped, length-normalized,
// KL-penalized objective.
double reference_objective(const std::vector<GroupRollout>& groups, const PolicyParams& theta,
                           const PolicyParams& ref, const RftConfig& cfg) {
  double total = 0;
  for (const auto& g : groups) {
    double group_sum = 0;
    for (const auto& r : g.responses) {
      double seq = 0;
      TokenSeq prefix;
      for (std::size_t t = 0; t < r.tokens.size(); ++t) {
        const Eigen::VectorXd lp = planlab::token_logprobs(theta, g.context, prefix);
        const Eigen::VectorXd lq = planlab::token_logprobs(ref, g.context, prefix);
        const double a = lp(r.tokens[t]), b = lq(r.tokens[t]);
        const double ratio = std::exp(a - r.old_logprobs(static_cast<Eigen::Index>(t)));
        const double clipped = std::min(std::max(ratio, 1 - cfg.clip_eps), 1 + cfg.clip_eps);
        double kl;
        if (cfg.kl_mode == planlab::KlMode::Estimator) {
          kl = std::exp(b - a) - (b - a) - 1;
        } else {
          kl = (lp.array().exp() * (lp - lq).array()).sum();
        }
        seq += std::min(ratio * r.advantage, clipped * r.advantage) - cfg.kl_coeff * kl;
        prefix.push_back(r.tokens[t]);
      }
      group_sum += seq / static_cast<double>(r.tokens.size());
    }
    total += group_sum / static_cast<double>(g.responses.size());
  }
  return total / static_cast<double>(groups.size());
}

struct GrpoFixture {
  Vocab vocab{2, 2, {}};
  PolicyShape shape = PolicyShape::for_vocab(vocab, 3, 5, 6);
  PolicyParams theta = PolicyParams::random(shape, 1);
  PolicyParams ref = PolicyParams::random(shape, 2);
  PolicyParams old = PolicyParams::random(shape, 3);
  std::vector<GroupRollout> groups;

  GrpoFixture() {
    // Two groups of two responses, three tokens each.
    const std::vector<std::vector<TokenSeq>> toks{{{0, 3, 5}, {4, 4, 1}}, {{2, 8, 0}, {1, 1, 7}}};
    const double adv[2][2] = {{0.9, -0.9}, {-1.0, 1.0}};
    for (int gi = 0; gi < 2; ++gi) {
      GroupRollout g{random_vector(10 + gi, 3), {}};
      for (int i = 0; i < 2; ++i) {
        ScoredRollout r;
        r.tokens = toks[gi][i];
        const planlab::Episode ep{g.context, r.tokens};
        r.old_logprobs =
            planlab::TeacherForcedPass(old, std::span(&ep, 1)).realized_logprobs(0);
        r.advantage = adv[gi][i];
        g.responses.push_back(r);
      }
      groups.push_back(g);
    }
  }
};

TEST(GroupAdvantages, KnownValues) {
  Eigen::VectorXd r(4);
  r << 0, 1, 2, 3;
  const Eigen::VectorXd a = planlab::group_advantages(r);
  const double mean = 1.5;
  const double sd = std::sqrt((2.25 + 0.25 + 0.25 + 2.25) / 4);
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(a(i), (r(i) - mean) / sd, 1e-12);
  EXPECT_NEAR(a(0), -1.34164, 1e-5);
  EXPECT_NEAR(a(1), -0.44721, 1e-5);
  EXPECT_NEAR(a.sum(), 0.0, 1e-12);
}

TEST(GroupAdvantages, ZeroVarianceGivesZeros) {
  EXPECT_TRUE(planlab::group_advantages(Eigen::VectorXd::Constant(4, 0.7)).isZero(0));
  Eigen::VectorXd tiny(2);
  tiny << 1.0, 1.0 + 1e-12;
  EXPECT_TRUE(planlab::group_advantages(tiny, 1e-8).isZero(0));
}

TEST(GroupAdvantages, ScaleAndShiftInvariant) {
  const Eigen::VectorXd r = random_vector(4, 8);
  const Eigen::VectorXd a = planlab::group_advantages(r);
  const Eigen::VectorXd b = planlab::group_advantages((3.0 * r.array() - 2.0).matrix());
  EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_NEAR(a.squaredNorm() / 8, 1.0, 1e-12);
}

TEST(KlPerToken, NonNegativeAndZeroAtEquality) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-20.0, 0.0);
  for (int i = 0; i < 10000; ++i) EXPECT_GE(planlab::kl_per_token(u(rng), u(rng)), 0.0);
  EXPECT_EQ(planlab::kl_per_token(-1.3, -1.3), 0.0);
}

TEST(GrpoLoss, ObjectiveMatchesReference) {
  GrpoFixture f;
  for (auto mode : {planlab::KlMode::Estimator, planlab::KlMode::FullVocabulary}) {
    RftConfig cfg;
    cfg.kl_mode = mode;
    cfg.kl_coeff = 0.3;
    const auto res = planlab::grpo_loss(f.groups, f.theta, f.ref, cfg);
    EXPECT_NEAR(res.objective, reference_objective(f.groups, f.theta, f.ref, cfg), 1e-12);
    EXPECT_EQ(res.tokens, 12u);
  }
}

TEST(GrpoLoss, GradientMatchesFiniteDifferences) {
  GrpoFixture f;
  for (auto mode : {planlab::KlMode::Estimator, planlab::KlMode::FullVocabulary}) {
    RftConfig cfg;
    cfg.kl_mode = mode;
    cfg.kl_coeff = 0.3;
    const Eigen::VectorXd g = planlab::grpo_loss(f.groups, f.theta, f.ref, cfg).gradient.values();
    const double h = 1e-6;
    for (Eigen::Index k = 0; k < f.theta.size(); ++k) {
      PolicyParams plus = f.theta, minus = f.theta;
      plus.values()(k) += h;
      minus.values()(k) -= h;
      const double fd = (planlab::grpo_loss(f.groups, plus, f.ref, cfg).objective -
                         planlab::grpo_loss(f.groups, minus, f.ref, cfg).objective) /
                        (2 * h);
      EXPECT_NEAR(g(k), fd, 1e-4 * std::max(1.0, std::abs(fd))) << "coordinate " << k;
    }
  }
}

TEST(GrpoLoss, ClippedTokensCarryNoSurrogateGradient) {
  GrpoFixture f;
  RftConfig cfg;
  cfg.kl_coeff = 0.0;
  cfg.clip_eps = 1e-9;
  // Positive advantages with ratio above 1 + eps, negative ones below 1 - eps,
  // sit on the flat side of the clip.
  for (auto& g : f.groups) {
    for (auto& r : g.responses) {
      const planlab::Episode ep{g.context, r.tokens};
      const Eigen::VectorXd lp =
          planlab::TeacherForcedPass(f.theta, std::span(&ep, 1)).realized_logprobs(0);
      r.advantage = 1.0;
      r.old_logprobs = lp.array() - 0.5;
    }
  }
  const auto res = planlab::grpo_loss(f.groups, f.theta, f.ref, cfg);
  EXPECT_TRUE(res.gradient.values().isZero(0));
  EXPECT_EQ(res.clip_fraction, 1.0);
}

TEST(GrpoLoss, FreshPolicyHasZeroObjectiveAndKl) {
  GrpoFixture f;
  RftConfig cfg;
  for (auto& g : f.groups) {
    for (auto& r : g.responses) {
      const planlab::Episode ep{g.context, r.tokens};
      r.old_logprobs = planlab::TeacherForcedPass(f.theta, std::span(&ep, 1)).realized_logprobs(0);
    }
  }
  const auto res = planlab::grpo_loss(f.groups, f.theta, f.theta, cfg);
  EXPECT_NEAR(res.objective, 0.0, 1e-15);
  EXPECT_EQ(res.mean_kl, 0.0);
  EXPECT_EQ(res.clip_fraction, 0.0);
}

TEST(GrpoLoss, SmallAscentStepIncreasesObjective) {
  GrpoFixture f;
  RftConfig cfg;
  cfg.kl_coeff = 0.1;
  const auto before = planlab::grpo_loss(f.groups, f.theta, f.ref, cfg);
  PolicyParams next = f.theta;
  next.values() += 1e-3 * before.gradient.values();
  EXPECT_GT(planlab::grpo_loss(f.groups, next, f.ref, cfg).objective, before.objective);
}

TEST(GrpoLoss, RejectsMismatchedLogprobs) {
  GrpoFixture f;
  f.groups[0].responses[0].old_logprobs = Eigen::VectorXd::Zero(2);
  EXPECT_THROW(planlab::grpo_loss(f.groups, f.theta, f.ref, RftConfig{}), std::invalid_argument);
}

TEST(RftConfig, Validation) {
  RftConfig cfg;
  cfg.group_size = 1;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.clip_eps = -0.1;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.mini_batch = 0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

std::vector<planlab::Sample> tiny_dataset(const Vocab& vocab, int n) {
  std::vector<planlab::Sample> out;
  for (int i = 0; i < n; ++i) {
    planlab::Sample s;
    s.id = "s" + std::to_string(i);
    s.context = random_vector(100 + i, 16);
    s.reasoning = i % 2 ? "clear ahead keep straight" : "cones right turn left";
    s.trajectory.resize(2, vocab.n_waypoints());
    for (int k = 0; k < vocab.n_waypoints(); ++k) {
      s.trajectory.col(k) << 320 + (i % 2 ? 0 : -6 * k), 450 - 15 * k;
    }
    out.push_back(s);
  }
  return out;
}

TEST(Sft, LossDecreases) {
  const Vocab vocab;
  PolicyParams params = PolicyParams::random(PolicyShape::for_vocab(vocab), 3);
  const auto data = tiny_dataset(vocab, 8);
  planlab::SftConfig cfg;
  cfg.learning_rate = 1e-2;
  cfg.optimizer = planlab::Optimizer::Adam;
  cfg.weight_decay = 0;
  cfg.batch_size = 4;
  cfg.epochs = 20;
  std::vector<nlohmann::json> records;
  const auto res =
      planlab::train_sft(params, data, vocab, cfg, [&](const nlohmann::json& j) { records.push_back(j); });
  ASSERT_EQ(res.losses.size(), 40u);
  EXPECT_LT(res.losses.back(), 0.5 * res.losses.front());
  EXPECT_EQ(records.size(), 40u);
  EXPECT_TRUE(records.front().contains("loss"));
}

TEST(Sft, StepLossIsMeanTokenNll) {
  const Vocab vocab;
  PolicyParams params = PolicyParams::random(PolicyShape::for_vocab(vocab), 4);
  const auto data = tiny_dataset(vocab, 3);
  double nll = 0;
  std::size_t tokens = 0;
  for (const auto& s : data) {
    const auto toks = planlab::encode_response(s.reasoning, s.trajectory, s.resolution, vocab);
    const planlab::Episode ep{s.context, toks};
    nll -= planlab::TeacherForcedPass(params, std::span(&ep, 1)).realized_logprobs(0).sum();
    tokens += toks.size();
  }
  planlab::SftConfig cfg;
  cfg.learning_rate = 0;
  cfg.weight_decay = 0;
  const PolicyParams before = params;
  const auto r = planlab::sft_step(params, data, vocab, cfg);
  EXPECT_EQ(r.tokens, tokens);
  EXPECT_NEAR(r.loss, nll / static_cast<double>(tokens), 1e-12);
  EXPECT_EQ(params.values(), before.values());
}

TEST(Sft, SgdStepFollowsNegativeGradientWithDecay) {
  const Vocab vocab;
  PolicyParams params = PolicyParams::random(PolicyShape::for_vocab(vocab), 5);
  const auto data = tiny_dataset(vocab, 2);
  std::vector<planlab::Episode> eps;
  std::vector<Eigen::VectorXd> w;
  std::size_t tokens = 0;
  for (const auto& s : data) {
    eps.push_back({s.context, planlab::encode_response(s.reasoning, s.trajectory, s.resolution, vocab)});
    tokens += eps.back().tokens.size();
  }
  for (const auto& e : eps) {
    w.push_back(Eigen::VectorXd::Constant(static_cast<Eigen::Index>(e.tokens.size()),
                                          1.0 / static_cast<double>(tokens)));
  }
  const Eigen::VectorXd ascent = planlab::TeacherForcedPass(params, eps).backward(w).values();
  planlab::SftConfig cfg;
  cfg.learning_rate = 0.1;
  cfg.weight_decay = 0.5;
  const Eigen::VectorXd theta0 = params.values();
  planlab::sft_step(params, data, vocab, cfg);
  const Eigen::VectorXd expected = theta0 + 0.1 * ascent - 0.1 * 0.5 * theta0;
  EXPECT_LT((params.values() - expected).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Sft, SkipsUntokenizableSamples) {
  const Vocab vocab;
  PolicyParams params(PolicyShape::for_vocab(vocab));
  auto data = tiny_dataset(vocab, 3);
  data[1].reasoning = "pothole ahead";
  planlab::SftConfig cfg;
  const auto r = planlab::sft_step(params, data, vocab, cfg);
  ASSERT_EQ(r.skipped.size(), 1u);
  EXPECT_EQ(r.skipped[0], "s1");
}

TEST(Sft, WithoutReasoningTargetsHaveEmptyThink) {
  const Vocab vocab;
  PolicyParams a(PolicyShape::for_vocab(vocab)), b(PolicyShape::for_vocab(vocab));
  const auto data = tiny_dataset(vocab, 2);
  planlab::SftConfig cfg;
  cfg.learning_rate = 0;
  const auto with = planlab::sft_step(a, data, vocab, cfg);
  cfg.include_reasoning = false;
  const auto without = planlab::sft_step(b, data, vocab, cfg);
  EXPECT_EQ(with.tokens, without.tokens + 8);
}

TEST(Rft, ConstantRewardLeavesPolicyUnchanged) {
  const Vocab vocab;
  const PolicyParams sft = PolicyParams::random(PolicyShape::for_vocab(vocab), 6);
  const auto data = tiny_dataset(vocab, 6);
  RftConfig cfg;
  cfg.batch_size = 3;
  cfg.mini_batch = 2;
  cfg.learning_rate = 1.0;
  planlab::SamplingConfig sampling;
  auto constant = [](std::span<const planlab::TokenId>, const planlab::Sample&) {
    planlab::RewardBreakdown r;
    r.r_total = 0.25;
    return r;
  };
  const auto res = planlab::train_rft(sft, data, vocab, cfg, sampling, constant);
  EXPECT_EQ(res.params.values(), sft.values());
  ASSERT_EQ(res.steps.size(), 4u);
  for (const auto& s : res.steps) {
    EXPECT_EQ(s.mean_kl, 0.0);
    EXPECT_DOUBLE_EQ(s.mean_reward, 0.25);
  }
}

TEST(Rft, DeterministicUnderSeed) {
  const Vocab vocab;
  const auto data = tiny_dataset(vocab, 8);
  PolicyParams sft = PolicyParams::random(PolicyShape::for_vocab(vocab), 7);
  planlab::SftConfig scfg;
  scfg.optimizer = planlab::Optimizer::Adam;
  scfg.learning_rate = 1e-2;
  scfg.weight_decay = 0;
  scfg.batch_size = 8;
  scfg.epochs = 40;
  planlab::train_sft(sft, data, vocab, scfg);

  RftConfig cfg;
  cfg.batch_size = 8;
  cfg.mini_batch = 8;
  cfg.group_size = 8;
  cfg.learning_rate = 0.5;
  cfg.max_grad_norm = 1.0;
  cfg.epochs = 6;
  planlab::SamplingConfig sampling;
  const auto reward = planlab::make_reward_fn(vocab, planlab::RewardOptions{});
  const auto a = planlab::train_rft(sft, data, vocab, cfg, sampling, reward);
  const auto b = planlab::train_rft(sft, data, vocab, cfg, sampling, reward);
  EXPECT_EQ(a.params.values(), b.params.values());
  ASSERT_EQ(a.steps.size(), 6u);
  EXPECT_NE(a.params.values(), sft.values());
  EXPECT_GT(a.steps.back().mean_kl, 0.0);
  cfg.seed = 1;
  EXPECT_NE(planlab::train_rft(sft, data, vocab, cfg, sampling, reward).params.values(),
            a.params.values());
}

TEST(Rft, NonFiniteRewardRaisesTrainingError) {
  const Vocab vocab;
  const PolicyParams sft = PolicyParams::random(PolicyShape::for_vocab(vocab), 8);
  const auto data = tiny_dataset(vocab, 2);
  auto bad = [](std::span<const planlab::TokenId>, const planlab::Sample& s) {
    planlab::RewardBreakdown r;
    r.r_total = s.id == "s1" ? std::nan("") : 1.0;
    return r;
  };
  try {
    planlab::train_rft(sft, data, vocab, RftConfig{}, planlab::SamplingConfig{}, bad);
    FAIL() << "expected TrainingError";
  } catch (const planlab::TrainingError& e) {
    EXPECT_TRUE(e.dump().contains("groups"));
  }
}

TEST(RftStep, NanMetricsSerializeAsNull) {
  planlab::RftStep s;
  s.ade = std::nan("");
  const auto j = s.to_json();
  EXPECT_TRUE(j["ade"].is_null());
  EXPECT_TRUE(j["mean_reward"].is_number());
}

TEST(Optimizer, Names) {
  EXPECT_EQ(planlab::optimizer_from_string("adam"), planlab::Optimizer::Adam);
  EXPECT_EQ(planlab::to_string(planlab::Optimizer::Sgd), "sgd");
  EXPECT_THROW(planlab::optimizer_from_string("rmsprop"), std::invalid_argument);
}

}  // namespace
