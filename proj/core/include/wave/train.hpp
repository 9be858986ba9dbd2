#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wave/dataset.hpp"
#include "wave/model.hpp"
#include "wave/objectives.hpp"
#include "wave/optimizer.hpp"

namespace wave {

struct TrainConfig {
  // Toy-scale default; the large-model value is kept for reference only.
  double learning_rate = 3e-4;
  static constexpr double kReferenceLearningRate = 2e-5;
  AdamWConfig optimizer;
  double warmup_fraction = 0.05;
  std::size_t steps = 3000;
  std::uint64_t seed = 0;
  double clip_norm = 1.0;           // 0 disables clipping
  std::size_t checkpoint_every = 0;  // 0: final checkpoint only

  void validate() const;
};

struct LossPoint {
  std::size_t step = 0;  // 1-based
  TaskTag task_tag = TaskTag::retrieval;
  std::string source_tag;
  double loss = 0.0;
  double lr = 0.0;
  double grad_norm = 0.0;  // before clipping

  bool operator==(const LossPoint&) const = default;
};

struct TrainHooks {
  std::function<void(const LossPoint&)> on_step;
  // Called after step s (1-based) whenever s is a multiple of checkpoint_every.
  std::function<void(std::size_t step, const WaveModel&)> on_checkpoint;
};

/// Optimizes the model's trainable parameters on task-homogeneous train
/// batches: retrieval batches use the symmetric InfoNCE loss, QA batches the
/// distractor loss. Throws DivergenceError when a loss is not finite.
std::vector<LossPoint> train(WaveModel& model, const Dataset& dataset, const TrainConfig& config,
                             const ObjectiveConfig& objective, const TrainHooks& hooks = {});

/// Loss of one planned batch; the graph stays attached for backward.
Tensor batch_loss(const WaveModel& model, const Dataset& dataset, std::span<const std::size_t> indices,
                  TaskTag tag, const ObjectiveConfig& objective, const ForwardOptions& options = {});

/// Mean loss over a window of the trace, optionally restricted to one task tag.
double mean_loss(const std::vector<LossPoint>& trace, std::size_t begin, std::size_t end,
                 std::optional<TaskTag> tag = std::nullopt);

std::string loss_trace_csv(const std::vector<LossPoint>& trace);
void write_loss_trace(const std::vector<LossPoint>& trace, const std::filesystem::path& path);

}  // namespace wave
