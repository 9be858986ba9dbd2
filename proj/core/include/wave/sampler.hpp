#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "wave/dataset.hpp"

namespace wave {

/// One mini-batch: N record indices that all share a task tag and data source.
struct TaskBatchPlan {
  TaskTag task_tag = TaskTag::retrieval;
  std::string source_tag;
  std::vector<std::size_t> indices;  // into Dataset::records

  bool operator==(const TaskBatchPlan&) const = default;
};

/// Task-aware sampler. Records of one split are grouped by source; an epoch
/// permutes each group, chunks it into full batches of N, then shuffles the
/// batches across groups. Groups smaller than N are dropped.
class TaskAwareSampler {
 public:
  /// Throws EmptyBatchError when N exceeds every group.
  TaskAwareSampler(const Dataset& dataset, Split split, std::size_t batch_size, std::uint64_t seed);

  /// Batches of epoch `e`; a pure function of (seed, e).
  std::vector<TaskBatchPlan> epoch(std::size_t e) const;
  /// Endless stream over consecutive epochs.
  TaskBatchPlan next();

  std::size_t batch_size() const { return batch_size_; }
  std::size_t batches_per_epoch() const;
  /// Sources dropped for having fewer than N records.
  const std::vector<std::string>& dropped_sources() const { return dropped_; }

 private:
  struct Group {
    TaskTag tag;
    std::string source;
    std::vector<std::size_t> indices;
  };
  std::vector<Group> groups_;
  std::vector<std::string> dropped_;
  std::size_t batch_size_;
  std::uint64_t seed_;
  std::size_t epoch_ = 0;
  std::vector<TaskBatchPlan> current_;
  std::size_t cursor_ = 0;
};

/// One epoch of train-split batches.
std::vector<TaskBatchPlan> sample_batches(const Dataset& dataset, std::size_t batch_size, std::uint64_t seed);

}  // namespace wave
