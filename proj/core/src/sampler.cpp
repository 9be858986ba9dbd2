#include "wave/sampler.hpp"

#include <algorithm>
#include <iostream>
#include <map>
#include <numeric>
#include <random>

#include "wave/errors.hpp"
#include "wave/rng.hpp"

namespace wave {

TaskAwareSampler::TaskAwareSampler(const Dataset& dataset, Split split, std::size_t batch_size,
                                   std::uint64_t seed)
    : batch_size_(batch_size), seed_(seed) {
  if (batch_size == 0) throw ArgumentError("batch size must be >= 1");
  std::map<std::string, Group> by_source;
  for (std::size_t i = 0; i < dataset.records.size(); ++i) {
    const Record& r = dataset.records[i];
    if (r.split != split) continue;
    auto [it, fresh] = by_source.try_emplace(r.source_tag, Group{r.task_tag, r.source_tag, {}});
    it->second.indices.push_back(i);
  }
  for (auto& [source, group] : by_source) {
    if (group.indices.size() < batch_size) {
      std::cerr << "warning: dropping data source '" << source << "' (" << group.indices.size()
                << " records < batch size " << batch_size << ")\n";
      dropped_.push_back(source);
    } else {
      groups_.push_back(std::move(group));
    }
  }
  if (groups_.empty()) {
    throw EmptyBatchError("batch size " + std::to_string(batch_size) + " exceeds every data group");
  }
}

std::size_t TaskAwareSampler::batches_per_epoch() const {
  std::size_t n = 0;
  for (const auto& g : groups_) n += g.indices.size() / batch_size_;
  return n;
}

std::vector<TaskBatchPlan> TaskAwareSampler::epoch(std::size_t e) const {
  std::vector<TaskBatchPlan> plans;
  for (std::size_t gi = 0; gi < groups_.size(); ++gi) {
    const Group& g = groups_[gi];
    std::vector<std::size_t> order = g.indices;
    std::mt19937_64 rng(derive_seed(seed_, {0x5e, e, gi}));
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t b = 0; b + batch_size_ <= order.size(); b += batch_size_) {
      plans.push_back({g.tag, g.source, {order.begin() + b, order.begin() + b + batch_size_}});
    }
  }
  std::mt19937_64 rng(derive_seed(seed_, {0x5f, e}));
  std::shuffle(plans.begin(), plans.end(), rng);
  return plans;
}

TaskBatchPlan TaskAwareSampler::next() {
  if (cursor_ >= current_.size()) {
    current_ = epoch(epoch_++);
    cursor_ = 0;
  }
  return current_[cursor_++];
}

std::vector<TaskBatchPlan> sample_batches(const Dataset& dataset, std::size_t batch_size, std::uint64_t seed) {
  return TaskAwareSampler(dataset, Split::train, batch_size, seed).epoch(0);
}

}  // namespace wave
