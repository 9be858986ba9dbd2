#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "wave/dataset.hpp"
#include "wave/model.hpp"
#include "wave/objectives.hpp"
#include "wave/train.hpp"

namespace wave {

struct AblationRow {
  FusionStrategy strategy = FusionStrategy::mlp_fusion;
  std::string setting;  // "visual" or "audio_visual"
  std::size_t pool_size = 0;
  std::size_t queries = 0;
  std::size_t hits = 0;
  double r1 = 0.0;
  double chance = 0.0;
  double p_value = 1.0;  // one-sided binomial test of hits against chance
  bool beats_chance = false;

  bool operator==(const AblationRow&) const = default;
};

struct AblationTable {
  std::vector<AblationRow> rows;
  double alpha = 0.01;

  const AblationRow& row(FusionStrategy strategy, const std::string& setting) const;
  std::string to_csv() const;
  void write_csv(const std::filesystem::path& path) const;
};

struct AblationSetup {
  ModelConfig model;
  LoraConfig lora;
  ObjectiveConfig objective;
  TrainConfig train;
  std::uint64_t model_seed = 0;
};

/// Trains one model per strategy with everything else fixed and scores
/// text-to-video R@1 on the audio-visual eval clips, once with their audio
/// streams and once with the audio removed.
AblationTable run_fusion_ablation(const AblationSetup& setup, const Dataset& dataset,
                                  const std::vector<FusionStrategy>& strategies = {kAllFusionStrategies.begin(),
                                                                                   kAllFusionStrategies.end()},
                                  const std::function<void(FusionStrategy, const std::vector<LossPoint>&)>&
                                      on_trained = {});

}  // namespace wave
