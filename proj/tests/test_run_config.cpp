#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "wave/errors.hpp"
#include "wave/rng.hpp"
#include "wave/run_config.hpp"

using namespace wave;
using nlohmann::json;

namespace {

std::string error_of(const json& j) {
  try {
    RunConfig::from_json(j);
  } catch (const ValidationError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST(RunConfig, DefaultsAreValid) {
  const RunConfig c;
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.model.fusion_strategy, FusionStrategy::mlp_fusion);
  EXPECT_DOUBLE_EQ(c.objective.temperature, 0.01);
  EXPECT_EQ(c.data.num_classes, 32u);
  EXPECT_NO_THROW(RunConfig::from_json(json::object()).validate());
}

TEST(RunConfig, RoundTripThroughJson) {
  RunConfig c;
  c.seed = 42;
  c.model.fusion_strategy = FusionStrategy::weighted_sum;
  c.lora.enabled = !c.lora.enabled;
  c.train.steps = 17;
  c.data.counts[TaskType::video_qa] = 5;
  c.data.inject_duplicates = true;
  const RunConfig back = RunConfig::from_json(c.to_json());
  EXPECT_EQ(back.to_json(), c.to_json());
  EXPECT_EQ(back.digest(), c.digest());
  EXPECT_NE(RunConfig{}.digest(), c.digest());
}

TEST(RunConfig, PartialSectionsKeepDefaults) {
  const RunConfig c = RunConfig::from_json(json::parse(R"({"train": {"steps": 9}, "seed": 3})"));
  EXPECT_EQ(c.train.steps, 9u);
  EXPECT_EQ(c.seed, 3u);
  EXPECT_DOUBLE_EQ(c.train.learning_rate, TrainConfig{}.learning_rate);
}

TEST(RunConfig, AllProblemsReportedTogether) {
  const auto msg = error_of(json::parse(R"({
    "bogus": 1,
    "model": {"d_model": "wide", "fusion_strategy": "median"},
    "objective": {"temperature": -1},
    "data": {"counts": {"video_chat": 3}}
  })"));
  EXPECT_NE(msg.find("bogus"), std::string::npos) << msg;
  EXPECT_NE(msg.find("model.d_model"), std::string::npos) << msg;
  EXPECT_NE(msg.find("median"), std::string::npos) << msg;
  EXPECT_NE(msg.find("temperature"), std::string::npos) << msg;
  EXPECT_NE(msg.find("video_chat"), std::string::npos) << msg;
}

TEST(RunConfig, CrossSectionChecks) {
  EXPECT_NE(error_of(json::parse(R"({"data": {"max_frames": 20}})")).find("max_frames"), std::string::npos);
  EXPECT_NE(error_of(json::parse(R"({"objective": {"distractors": 10}})")).find("distractors"), std::string::npos);
  EXPECT_EQ(error_of(json::parse(R"({"objective": {"distractors": 9}})")), "");
  EXPECT_NE(error_of(json::parse(R"({"data": {"workers": 0}})")).find("workers"), std::string::npos);
  EXPECT_NE(error_of(json::parse(R"({"model": {"vocab_size": 10}})")).find("vocab_size"), std::string::npos);
}

TEST(RunConfig, SeedsAreDerivedPerComponent) {
  RunConfig c;
  c.seed = 7;
  EXPECT_EQ(c.latent_seed(), derive_seed(7, {1}));
  EXPECT_EQ(c.data_seed(), derive_seed(7, {2}));
  EXPECT_EQ(c.model_seed(), derive_seed(7, {3}));
  EXPECT_EQ(c.train_seed(), derive_seed(7, {4}));
  EXPECT_EQ(c.resolved_train().seed, c.train_seed());
  EXPECT_EQ(c.latent_params().seed, c.latent_seed());
  EXPECT_EQ(c.latent_params().frame_dim, c.model.frame_dim);
  EXPECT_EQ(c.generate_options().distractors, c.objective.distractors);
}

TEST(RunConfig, LoadErrors) {
  const auto dir = std::filesystem::temp_directory_path() / "wave_test_run_config";
  std::filesystem::create_directories(dir);
  EXPECT_THROW(RunConfig::load(dir / "missing.json"), IoError);
  std::ofstream(dir / "bad.json") << "{ not json";
  EXPECT_THROW(RunConfig::load(dir / "bad.json"), ValidationError);
  std::ofstream(dir / "ok.json") << R"({"seed": 5})";
  EXPECT_EQ(RunConfig::load(dir / "ok.json").seed, 5u);
  std::filesystem::remove_all(dir);
}
