#include "planlab/datakit.hpp"
#include "planlab/parsing.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace {

namespace fs = std::filesystem;
using planlab::Sample;
using planlab::SplitTag;
using planlab::Trajectory;

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() /
            ("planlab_datakit_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
             "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

// Samples whose x variance is given directly: x = {0, d} alternating.
std::vector<Sample> with_spreads(const std::vector<double>& spreads) {
  std::vector<Sample> out;
  for (std::size_t i = 0; i < spreads.size(); ++i) {
    Sample s;
    char id[16];
    std::snprintf(id, sizeof id, "s%03zu", i);
    s.id = id;
    s.trajectory.resize(2, 2);
    s.trajectory << 0, spreads[i], 1, 2;
    out.push_back(s);
  }
  return out;
}

TEST(XVariance, Examples) {
  Trajectory t(2, 3);
  t << 5, 5, 5, 0, 1, 2;
  EXPECT_EQ(planlab::x_variance(t), 0.0);
  t << 0, 2, 4, 0, 1, 2;
  EXPECT_NEAR(planlab::x_variance(t), 8.0 / 3.0, 1e-15);
  Trajectory moved = t;
  moved.row(0).array() += 123.0;
  EXPECT_NEAR(planlab::x_variance(moved), 8.0 / 3.0, 1e-12);
}

TEST(Ratio, Parse) {
  const auto r = planlab::Ratio::parse("9:1");
  EXPECT_DOUBLE_EQ(r.first_share(), 0.9);
  EXPECT_EQ(r.str(), "9:1");
  EXPECT_DOUBLE_EQ(planlab::Ratio::parse("0.6:0.4").first_share(), 0.6);
  for (const char* bad : {"9", "a:b", "0:0", "-1:2", "1:2:3", ""}) {
    EXPECT_THROW(planlab::Ratio::parse(bad), std::invalid_argument) << bad;
  }
}

TEST(Split, DefaultCorpusSizes) {
  const auto c = planlab::plan_counts(5430, planlab::SplitPlan{});
  EXPECT_EQ(c.sft(), 4344u);
  EXPECT_EQ(c.rft(), 1086u);
  EXPECT_EQ(c.sft_turn + c.rft_turn,
            static_cast<std::size_t>(std::llround(4344 * 0.4 + 1086 * 0.4)));
}

TEST(Split, TenSamplesHalfTurn) {
  std::vector<double> spreads{1, 9, 3, 7, 5, 2, 10, 4, 8, 6};
  planlab::SplitPlan plan;
  plan.sft_rft = {1, 1};
  plan.sft_straight_turn = {1, 1};
  plan.rft_straight_turn = {1, 1};
  const auto tagged = planlab::split_sft_rft(with_spreads(spreads), plan);
  for (std::size_t i = 0; i < spreads.size(); ++i) {
    const bool turn = tagged[i].tag == SplitTag::SftTurn || tagged[i].tag == SplitTag::RftTurn;
    EXPECT_EQ(turn, spreads[i] > 5) << i;
  }
  const auto counts = planlab::tag_counts(tagged);
  EXPECT_EQ(counts.at(SplitTag::SftTurn) + counts.at(SplitTag::SftStraight), 5u);
}

TEST(Split, OrderingProperty) {
  const auto corpus = planlab::generate_synthetic(
      [] {
        planlab::SyntheticConfig c;
        c.samples = 600;
        c.val_dense = 10;
        c.val_standard_overlap = 2;
        c.val_standard_extra = 1;
        c.ood_scenes = 1;
        return c;
      }(),
      3);
  const auto tagged = planlab::split_sft_rft(corpus.samples, planlab::SplitPlan{});
  double min_turn = 1e300, max_straight = -1;
  for (const auto& s : tagged) {
    const double v = planlab::x_variance(s.trajectory);
    if (s.tag == SplitTag::SftTurn || s.tag == SplitTag::RftTurn) min_turn = std::min(min_turn, v);
    if (s.tag == SplitTag::SftStraight || s.tag == SplitTag::RftStraight) {
      max_straight = std::max(max_straight, v);
    }
  }
  EXPECT_GE(min_turn, max_straight);
  // Original order is preserved.
  for (std::size_t i = 0; i < tagged.size(); ++i) EXPECT_EQ(tagged[i].id, corpus.samples[i].id);
  const auto again = planlab::split_sft_rft(corpus.samples, planlab::SplitPlan{});
  for (std::size_t i = 0; i < tagged.size(); ++i) EXPECT_EQ(tagged[i].tag, again[i].tag);
}

TEST(Split, AbsoluteCountsLeaveLeftovers) {
  planlab::SplitPlan plan;
  plan.sft_count = 50;
  plan.rft_count = 20;
  const auto tagged = planlab::split_sft_rft(with_spreads(std::vector<double>(100, 1.0)), plan);
  const auto counts = planlab::tag_counts(tagged);
  EXPECT_EQ(counts.at(SplitTag::Unassigned), 30u);
  plan.sft_count = 90;
  try {
    planlab::plan_counts(100, plan);
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("deficit 10"), std::string::npos) << e.what();
  }
}

TEST(Split, TiesBrokenById) {
  auto data = with_spreads(std::vector<double>(10, 3.0));
  planlab::SplitPlan plan;
  plan.sft_rft = {1, 1};
  auto a = planlab::split_sft_rft(data, plan);
  std::reverse(data.begin(), data.end());
  auto b = planlab::split_sft_rft(data, plan);
  std::reverse(b.begin(), b.end());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].tag, b[i].tag);
}

TEST(Validation, DefaultPlanSizes) {
  const auto corpus = planlab::generate_synthetic(planlab::SyntheticConfig{}, 0);
  const auto sets = planlab::build_validation_sets(corpus.val_dense, corpus.val_standard);
  EXPECT_EQ(sets.easy.size(), 1000u);
  EXPECT_EQ(sets.hard.size(), 1000u);
  std::set<std::string> standard;
  for (const auto& s : corpus.val_standard) standard.insert(s.id);
  for (const auto& s : sets.easy) EXPECT_FALSE(standard.contains(s.id));
  for (const auto& s : sets.hard) EXPECT_FALSE(standard.contains(s.id));
  const auto again = planlab::build_validation_sets(corpus.val_dense, corpus.val_standard);
  for (std::size_t i = 0; i < sets.hard.size(); ++i) EXPECT_EQ(sets.hard[i].id, again.hard[i].id);
}

TEST(Validation, EasyIsTheMiddleSlice) {
  std::vector<double> spreads(200);
  for (std::size_t i = 0; i < spreads.size(); ++i) spreads[i] = static_cast<double>((i * 37) % 200);
  const auto dense = with_spreads(spreads);
  planlab::ValidationPlan plan{50, 30, 10, 0.7, 0.1, 4};
  const auto sets = planlab::build_validation_sets(dense, {}, plan);
  ASSERT_EQ(sets.easy.size(), 50u);
  // Spreads 0..199 each once; descending slice [75, 125) holds spreads 124 down to 75.
  for (const auto& s : sets.easy) {
    EXPECT_GE(s.trajectory(0, 1), 75.0);
    EXPECT_LE(s.trajectory(0, 1), 124.0);
    EXPECT_EQ(s.tag, SplitTag::ValEasy);
  }
  // Hard: 30 from the top 140 (spread >= 60), 10 from the bottom 20 (spread < 20).
  int top = 0, bottom = 0;
  for (const auto& s : sets.hard) {
    top += s.trajectory(0, 1) >= 60.0;
    bottom += s.trajectory(0, 1) < 20.0;
  }
  EXPECT_EQ(top, 30);
  EXPECT_EQ(bottom, 10);
  plan.seed = 5;
  const auto other = planlab::build_validation_sets(dense, {}, plan);
  bool differs = false;
  for (std::size_t i = 0; i < other.hard.size(); ++i) differs |= other.hard[i].id != sets.hard[i].id;
  EXPECT_TRUE(differs);
}

TEST(Validation, InfeasibleSizesReported) {
  const auto dense = with_spreads(std::vector<double>(100, 1.0));
  EXPECT_THROW(planlab::build_validation_sets(dense, {}, {200, 10, 5, 0.7, 0.1, 0}),
               std::invalid_argument);
  EXPECT_THROW(planlab::build_validation_sets(dense, {}, {10, 71, 5, 0.7, 0.1, 0}),
               std::invalid_argument);
  EXPECT_THROW(planlab::build_validation_sets(dense, {}, {10, 10, 11, 0.7, 0.1, 0}),
               std::invalid_argument);
}

TEST(Synthetic, StraightScenesStayBelowThreshold) {
  planlab::SyntheticConfig cfg;
  cfg.samples = 1000;
  cfg.turn_fraction = 0.0;
  cfg.straight_curvature = 0.0;
  cfg.val_dense = 10;
  cfg.val_standard_overlap = 0;
  cfg.val_standard_extra = 0;
  cfg.ood_scenes = 0;
  const auto corpus = planlab::generate_synthetic(cfg, 1);
  std::size_t below = 0;
  for (const auto& s : corpus.samples) below += planlab::x_variance(s.trajectory) < cfg.turn_variance_threshold;
  EXPECT_GE(below, 950u);
}

TEST(Synthetic, DefaultCorpusShapeAndBounds) {
  const planlab::SyntheticConfig cfg;
  const auto corpus = planlab::generate_synthetic(cfg, 2);
  EXPECT_EQ(corpus.samples.size(), 5430u);
  EXPECT_EQ(corpus.val_dense.size(), 3600u);
  EXPECT_EQ(corpus.val_standard.size(), 500u);
  EXPECT_EQ(corpus.ood.size(), 200u);
  std::size_t turns = 0;
  for (const auto& s : corpus.samples) {
    ASSERT_EQ(s.trajectory.cols(), 20);
    EXPECT_GE(s.trajectory.minCoeff(), 0.0);
    EXPECT_LE(s.trajectory.row(0).maxCoeff(), 640.0);
    EXPECT_LE(s.trajectory.row(1).maxCoeff(), 480.0);
    EXPECT_EQ(s.context.size(), 16);
    EXPECT_TRUE(planlab::parse_response(planlab::serialize_response(s.reasoning, s.trajectory),
                                        {20, true})
                    .valid());
    turns += s.reasoning.find("turn") != std::string::npos;
  }
  EXPECT_NEAR(static_cast<double>(turns) / 5430, 0.4, 0.03);
  for (const auto& scene : corpus.ood) {
    EXPECT_GE(scene.boxes.size(), 1u);
    EXPECT_LE(scene.boxes.size(), 3u);
    EXPECT_EQ(scene.context(3 + 5), 1.0);  // the held-out hazard class
  }
  for (const auto& s : corpus.samples) EXPECT_EQ(s.context(3 + 5), 0.0);
}

TEST(Synthetic, TurnsSteerAwayFromHazard) {
  planlab::SceneParams scene{0.6, 0.0, 0.5, 1, -1};
  EXPECT_EQ(planlab::describe_scene(scene), "cones left turn right");
  scene = {0.0, 0.0, 0.5, 0, 1};
  EXPECT_EQ(planlab::describe_scene(scene), "clear ahead keep straight");
  const Trajectory t = planlab::nominal_trajectory({0.0, 0.0, 0.0, 0, 1}, {640, 480}, 20);
  EXPECT_DOUBLE_EQ(t(0, 0), 320.0);
  EXPECT_DOUBLE_EQ(t(1, 19), 0.95 * 480 - 0.35 * 480);
}

TEST(Synthetic, SameSeedSameFile) {
  TempDir dir;
  planlab::SyntheticConfig cfg;
  cfg.samples = 300;
  const auto a = planlab::generate_synthetic(cfg, 9);
  const auto b = planlab::generate_synthetic(cfg, 9);
  planlab::save_samples(a.samples, dir / "a.jsonl");
  planlab::save_samples(b.samples, dir / "b.jsonl");
  EXPECT_EQ(read_file(dir / "a.jsonl"), read_file(dir / "b.jsonl"));
  const auto c = planlab::generate_synthetic(cfg, 10);
  planlab::save_samples(c.samples, dir / "c.jsonl");
  EXPECT_NE(read_file(dir / "a.jsonl"), read_file(dir / "c.jsonl"));
}

TEST(Synthetic, ValidatesConfig) {
  planlab::SyntheticConfig cfg;
  cfg.context_dim = 8;
  EXPECT_THROW(planlab::generate_synthetic(cfg, 0), std::invalid_argument);
  cfg = {};
  cfg.val_standard_overlap = cfg.val_dense + 1;
  EXPECT_THROW(planlab::generate_synthetic(cfg, 0), std::invalid_argument);
}

TEST(Io, SaveLoadRoundTrip) {
  TempDir dir;
  planlab::SyntheticConfig cfg;
  cfg.samples = 50;
  cfg.val_dense = 10;
  cfg.val_standard_overlap = 0;
  cfg.val_standard_extra = 0;
  cfg.ood_scenes = 20;
  auto corpus = planlab::generate_synthetic(cfg, 4);
  corpus.samples = planlab::split_sft_rft(corpus.samples, planlab::SplitPlan{});
  planlab::save_samples(corpus.samples, dir / "s.jsonl");
  const auto back = planlab::load_samples(dir / "s.jsonl");
  ASSERT_EQ(back.size(), corpus.samples.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back[i].id, corpus.samples[i].id);
    EXPECT_EQ(back[i].tag, corpus.samples[i].tag);
    EXPECT_EQ(back[i].reasoning, corpus.samples[i].reasoning);
    EXPECT_EQ(back[i].image, corpus.samples[i].image);
    EXPECT_EQ(back[i].trajectory, corpus.samples[i].trajectory);
    EXPECT_EQ(back[i].context, corpus.samples[i].context);
  }
  planlab::save_scenes(corpus.ood, dir / "o.jsonl");
  const auto scenes = planlab::load_scenes(dir / "o.jsonl");
  ASSERT_EQ(scenes.size(), 20u);
  EXPECT_EQ(scenes[3].boxes.size(), corpus.ood[3].boxes.size());
  EXPECT_EQ(scenes[3].boxes[0].x_max(), corpus.ood[3].boxes[0].x_max());

  planlab::save_instruction_samples(corpus.samples, dir / "i.jsonl");
  const auto instr = planlab::load_samples(dir / "i.jsonl");
  ASSERT_EQ(instr.size(), corpus.samples.size());
  EXPECT_EQ(instr[7].trajectory, corpus.samples[7].trajectory);
  EXPECT_EQ(instr[7].reasoning, corpus.samples[7].reasoning);
}

TEST(Io, HandWrittenInstructionFixture) {
  const auto samples =
      planlab::load_samples(fs::path(PLANLAB_FIXTURES) / "instruction_samples.jsonl");
  ASSERT_EQ(samples.size(), 2u);
  EXPECT_EQ(samples[0].id, "wz-0001");
  EXPECT_EQ(samples[0].reasoning, "cones right keep straight");
  EXPECT_DOUBLE_EQ(samples[0].trajectory(0, 1), 320.5);
  EXPECT_EQ(samples[0].image, "frames/wz-0001.jpg");
  EXPECT_EQ(samples[1].tag, SplitTag::SftTurn);
}

TEST(Io, ErrorsNameLineAndField) {
  TempDir dir;
  planlab::SyntheticConfig cfg;
  cfg.samples = 3;
  const auto corpus = planlab::generate_synthetic(cfg, 4);
  std::string text;
  for (int i = 0; i < 3; ++i) {
    auto j = planlab::sample_to_json(corpus.samples[static_cast<std::size_t>(i)]);
    if (i == 2) j.erase("trajectory");
    text += j.dump() + "\n";
  }
  write_file(dir / "missing.jsonl", text);
  try {
    planlab::load_samples(dir / "missing.jsonl");
    FAIL();
  } catch (const planlab::DataError& e) {
    EXPECT_EQ(e.line(), 3u);
    EXPECT_EQ(e.field(), "trajectory");
  }

  auto j = planlab::sample_to_json(corpus.samples[0]);
  j["trajectory"][3]["x"] = "oops";
  write_file(dir / "bad.jsonl", "\n" + j.dump() + "\n");
  try {
    planlab::load_samples(dir / "bad.jsonl");
    FAIL();
  } catch (const planlab::DataError& e) {
    EXPECT_EQ(e.line(), 2u);
    EXPECT_EQ(e.field(), "trajectory[3].x");
  }

  j = planlab::sample_to_json(corpus.samples[0]);
  j["trajectory"][5]["y"] = 481.0;
  write_file(dir / "oob.jsonl", j.dump() + "\n");
  EXPECT_THROW(planlab::load_samples(dir / "oob.jsonl"), planlab::DataError);

  j = planlab::sample_to_json(corpus.samples[0]);
  j["trajectory"].erase(0);
  write_file(dir / "short.jsonl", j.dump() + "\n");
  EXPECT_THROW(planlab::load_samples(dir / "short.jsonl"), planlab::DataError);
  EXPECT_EQ(planlab::load_samples(dir / "short.jsonl", {0}).front().trajectory.cols(), 19);

  write_file(dir / "garbage.jsonl", "{not json\n");
  EXPECT_THROW(planlab::load_samples(dir / "garbage.jsonl"), planlab::DataError);
  EXPECT_THROW(planlab::load_samples(dir / "absent.jsonl"), std::runtime_error);
}

TEST(Io, JsonArrayFiles) {
  TempDir dir;
  planlab::SyntheticConfig cfg;
  cfg.samples = 2;
  const auto corpus = planlab::generate_synthetic(cfg, 4);
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& s : corpus.samples) arr.push_back(planlab::sample_to_json(s));
  write_file(dir / "a.json", arr.dump(2));
  EXPECT_EQ(planlab::load_samples(dir / "a.json").size(), 2u);
  arr[1].erase("id");
  write_file(dir / "b.json", arr.dump(2));
  try {
    planlab::load_samples(dir / "b.json");
    FAIL();
  } catch (const planlab::DataError& e) {
    EXPECT_EQ(e.field(), "[1].id");
  }
}

TEST(Io, SingleRecordErrors) {
  EXPECT_THROW(planlab::sample_from_json(nlohmann::json::object()), planlab::DataError);
  EXPECT_THROW(planlab::scene_from_json({{"id", "x"}, {"width", 10}, {"height", 10},
                                         {"boxes", {{{"x_min", 5}, {"y_min", 0}, {"x_max", 2}, {"y_max", 3}}}}}),
               planlab::DataError);
}

TEST(SplitTag, Names) {
  for (auto t : {SplitTag::Unassigned, SplitTag::SftStraight, SplitTag::SftTurn,
                 SplitTag::RftStraight, SplitTag::RftTurn, SplitTag::ValEasy, SplitTag::ValHard}) {
    EXPECT_EQ(planlab::split_tag_from_string(planlab::to_string(t)), t);
  }
  EXPECT_THROW(planlab::split_tag_from_string("sft"), std::invalid_argument);
  EXPECT_TRUE(planlab::is_sft(SplitTag::SftTurn));
  EXPECT_FALSE(planlab::is_rft(SplitTag::SftTurn));
}

}  // namespace
