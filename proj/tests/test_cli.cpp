#include <gtest/gtest.h>

#include <sys/wait.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "wave/evaluate.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Small enough that every subcommand runs in seconds.
const char* kSmallConfig = R"({
  "seed": 4,
  "model": {"d_model": 12, "n_layers": 3, "n_heads": 2, "d_embed": 8, "d_ff": 16, "max_seq_len": 16,
            "max_frames": 3, "vocab_size": 24, "frame_dim": 5, "speech_dim": 4, "audio_dim": 6},
  "lora": {"rank": 2},
  "objective": {"batch_size": 4, "distractors": 2},
  "train": {"steps": 6, "learning_rate": 0.003},
  "data": {"num_classes": 4, "attribute_values": 4, "latent_dim": 2, "min_frames": 1, "max_frames": 3,
           "counts": {"video_text": 16, "video_qa": 8, "video_audio": 8, "audio_text": 8},
           "eval_per_group": 32}
})";

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("wave_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    std::ofstream(dir_ / "small.json") << kSmallConfig;
  }
  void TearDown() override { fs::remove_all(dir_); }

  int run(const std::string& args) const {
    const std::string cmd = std::string(WAVE_CLI_PATH) + " " + args + " > " + (dir_ / "stdout.txt").string() +
                            " 2> " + (dir_ / "stderr.txt").string();
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }
  std::string small() const { return "--config " + (dir_ / "small.json").string(); }
  std::string out(const std::string& name) const { return "--out " + (dir_ / name).string(); }

  static std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  fs::path dir_;
};

}  // namespace

TEST_F(Cli, GenerateWithDefaultsHasEveryTaskGroup) {
  ASSERT_EQ(run("generate " + out("g")), 0) << slurp(dir_ / "stderr.txt");
  std::ifstream in(dir_ / "g" / "dataset.jsonl");
  std::string line;
  std::getline(in, line);  // header
  std::set<std::string> tags;
  while (std::getline(in, line)) tags.insert(json::parse(line)["source_tag"].get<std::string>());
  EXPECT_EQ(tags, (std::set<std::string>{"synth-at", "synth-va", "synth-vqa", "synth-vt-av", "synth-vt-visual"}));
  EXPECT_TRUE(fs::exists(dir_ / "g" / "resolved_config.json"));
}

TEST_F(Cli, ZeroRetrievalCountDropsThoseGroups) {
  ASSERT_EQ(run("generate " + small() + " " + out("g") + " --count retrieval=0"), 0) << slurp(dir_ / "stderr.txt");
  std::ifstream in(dir_ / "g" / "dataset.jsonl");
  std::string line;
  std::getline(in, line);
  std::set<std::string> train_tags;
  while (std::getline(in, line)) {
    const auto j = json::parse(line);
    if (j["split"] == "train") train_tags.insert(j["source_tag"].get<std::string>());
  }
  EXPECT_EQ(train_tags, (std::set<std::string>{"synth-vqa"}));
}

TEST_F(Cli, MalformedConfigIsAValidationError) {
  std::ofstream(dir_ / "bad.json") << R"({"train": {"steps": "many"}, "nope": 1})";
  EXPECT_EQ(run("train --config " + (dir_ / "bad.json").string() + " " + out("t")), 1);
  const auto err = slurp(dir_ / "stderr.txt");
  EXPECT_NE(err.find("train.steps"), std::string::npos) << err;
  EXPECT_NE(err.find("nope"), std::string::npos) << err;
  EXPECT_EQ(run("train --bogus-flag"), 1);
}

TEST_F(Cli, MissingFilesAreIoErrors) {
  EXPECT_EQ(run("eval " + small() + " " + out("e") + " --checkpoint " + (dir_ / "none.bin").string()), 2);
  EXPECT_EQ(run("train --config " + (dir_ / "absent.json").string()), 2);
}

TEST_F(Cli, TrainingIsReproducibleAndLeavesInputsAlone) {
  ASSERT_EQ(run("generate " + small() + " " + out("d")), 0);
  const auto data = (dir_ / "d" / "dataset.jsonl").string();
  const auto before = slurp(data);
  const auto config_before = slurp(dir_ / "small.json");
  ASSERT_EQ(run("train " + small() + " --data " + data + " " + out("a")), 0) << slurp(dir_ / "stderr.txt");
  ASSERT_EQ(run("train " + small() + " --data " + data + " " + out("b")), 0);
  EXPECT_EQ(slurp(dir_ / "a" / "loss_trace.csv"), slurp(dir_ / "b" / "loss_trace.csv"));
  EXPECT_EQ(slurp(dir_ / "a" / "checkpoint.bin"), slurp(dir_ / "b" / "checkpoint.bin"));
  EXPECT_EQ(slurp(data), before);
  EXPECT_EQ(slurp(dir_ / "small.json"), config_before);
  EXPECT_TRUE(fs::exists(dir_ / "a" / "resolved_config.json"));
  ASSERT_EQ(run("train " + small() + " --seed 5 --data " + data + " " + out("c")), 0);
  EXPECT_NE(slurp(dir_ / "a" / "loss_trace.csv"), slurp(dir_ / "c" / "loss_trace.csv"));
}

TEST_F(Cli, UntrainedEvalSitsAtChance) {
  std::ofstream(dir_ / "zero.json") << [] {
    auto j = json::parse(kSmallConfig);
    j["train"]["steps"] = 0;
    return j.dump();
  }();
  const auto cfg = "--config " + (dir_ / "zero.json").string();
  ASSERT_EQ(run("train " + cfg + " " + out("z")), 0) << slurp(dir_ / "stderr.txt");
  ASSERT_EQ(run("eval " + cfg + " " + out("z") + " --checkpoint " + (dir_ / "z" / "checkpoint.bin").string()), 0)
      << slurp(dir_ / "stderr.txt");
  const auto report = json::parse(slurp(dir_ / "z" / "eval_report.json"));
  ASSERT_EQ(report["retrieval"].size(), 8u);
  ASSERT_EQ(report["qa"].size(), 2u);
  std::size_t hits = 0, queries = 0;
  for (const auto& r : report["retrieval"]) {
    EXPECT_EQ(r["pool_size"], 32);
    queries += r["queries"].get<std::size_t>();
    hits += static_cast<std::size_t>(std::lround(r["r1"].get<double>() * r["queries"].get<double>()));
  }
  const auto [lo, hi] = wave::binomial_interval(queries, 1.0 / 32.0, 0.999);
  EXPECT_GE(hits, lo);
  EXPECT_LE(hits, hi);
  EXPECT_TRUE(fs::exists(dir_ / "z" / "eval_report.csv"));
}

TEST_F(Cli, AblateWritesTenRows) {
  ASSERT_EQ(run("ablate " + small() + " " + out("ab")), 0) << slurp(dir_ / "stderr.txt");
  std::ifstream in(dir_ / "ab" / "ablation.csv");
  std::string line;
  std::size_t rows = 0;
  std::getline(in, line);
  EXPECT_EQ(line.rfind("strategy,", 0), 0u);
  while (std::getline(in, line)) rows += !line.empty() && line[0] != '#';
  EXPECT_EQ(rows, 10u);
}

TEST_F(Cli, DemoWritesAFourByFourMatrix) {
  ASSERT_EQ(run("train " + small() + " " + out("m")), 0);
  ASSERT_EQ(run("demo " + small() + " " + out("m") + " --samples 4 --checkpoint " +
                (dir_ / "m" / "checkpoint.bin").string()),
            0)
      << slurp(dir_ / "stderr.txt");
  std::ifstream in(dir_ / "m" / "demo_similarity.csv");
  std::string line;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), 4) << line;
    ++rows;
  }
  EXPECT_EQ(rows, 5u);  // header plus four prompts
  const auto summary = json::parse(slurp(dir_ / "m" / "demo_summary.json"));
  EXPECT_EQ(summary["samples"], 4);
}

TEST_F(Cli, DefaultsPrintsAValidConfig) {
  ASSERT_EQ(run("defaults"), 0);
  const auto j = json::parse(slurp(dir_ / "stdout.txt"));
  EXPECT_EQ(j["model"]["fusion_strategy"], "mlp_fusion");
}
