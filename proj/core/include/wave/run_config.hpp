#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "wave/dataset.hpp"
#include "wave/latent.hpp"
#include "wave/model_config.hpp"
#include "wave/objectives.hpp"
#include "wave/train.hpp"

namespace wave {

/// Synthetic-data settings. Feature widths come from the model section and
/// the distractor count from the objective section.
struct DataConfig {
  std::size_t num_classes = 32;
  std::size_t attribute_values = 8;
  std::size_t latent_dim = 8;
  double noise = 0.1;
  std::size_t min_frames = 2;
  std::size_t max_frames = 8;
  std::map<TaskType, std::size_t> counts = GenerateOptions{}.train_counts;
  std::size_t eval_per_group = 256;
  bool inject_duplicates = false;
  std::size_t workers = 1;
};

/// Everything a run needs. Every stochastic component draws from a seed
/// derived from `seed`.
struct RunConfig {
  std::uint64_t seed = 0;
  std::string out_dir = "runs/default";
  std::string data_path;  // empty: generate the dataset in memory
  ModelConfig model;
  LoraConfig lora;
  ObjectiveConfig objective;
  TrainConfig train;
  DataConfig data;

  /// Strict parse: unknown keys, wrong types and invalid values are all
  /// reported together in one ValidationError. Missing keys keep defaults.
  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig load(const std::filesystem::path& path);

  nlohmann::json to_json() const;
  /// SHA-256 of the canonical JSON form.
  std::string digest() const;
  void validate() const;

  std::uint64_t latent_seed() const;
  std::uint64_t data_seed() const;
  std::uint64_t model_seed() const;
  std::uint64_t train_seed() const;

  LatentParams latent_params() const;
  GenerateOptions generate_options() const;
  /// TrainConfig with the derived train seed filled in.
  TrainConfig resolved_train() const;
};

}  // namespace wave
