#include "wave/train.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "wave/errors.hpp"
#include "wave/rng.hpp"
#include "wave/sampler.hpp"

namespace wave {

void TrainConfig::validate() const {
  std::string errors;
  auto fail = [&](const std::string& msg) { errors += (errors.empty() ? "" : "; ") + msg; };
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) fail("train.learning_rate must be >= 0");
  if (!(optimizer.beta1 >= 0.0 && optimizer.beta1 < 1.0)) fail("train.beta1 must lie in [0, 1)");
  if (!(optimizer.beta2 >= 0.0 && optimizer.beta2 < 1.0)) fail("train.beta2 must lie in [0, 1)");
  if (!(optimizer.eps > 0.0)) fail("train.adam_eps must be positive");
  if (!(optimizer.weight_decay >= 0.0)) fail("train.weight_decay must be >= 0");
  if (!(warmup_fraction >= 0.0 && warmup_fraction <= 1.0)) fail("train.warmup_fraction must lie in [0, 1]");
  if (!(clip_norm >= 0.0)) fail("train.clip_norm must be >= 0");
  if (!errors.empty()) throw ValidationError(errors);
}

Tensor batch_loss(const WaveModel& model, const Dataset& dataset, std::span<const std::size_t> indices,
                  TaskTag tag, const ObjectiveConfig& objective, const ForwardOptions& options) {
  const std::size_t n = indices.size();
  std::vector<const MultimodalSample*> sources, texts;
  for (std::size_t i : indices) sources.push_back(&dataset.records.at(i).source);
  for (std::size_t i : indices) texts.push_back(&dataset.records[i].target);
  std::size_t per = 0;
  if (tag == TaskTag::qa) {
    per = dataset.records[indices[0]].distractors.size();
    for (std::size_t i : indices) {
      const auto& d = dataset.records[i].distractors;
      if (d.size() != per) throw ValidationError("qa records of one batch differ in distractor count");
      for (const auto& s : d) texts.push_back(&s);
    }
  }
  // Sources and targets run as two packed passes so each keeps its own layout.
  const Tensor s = model.embed(sources, options);
  const Tensor t_all = model.embed(texts, options);
  EmbeddingBatch batch;
  batch.source = s;
  batch.target = slice(t_all, 0, 0, n);
  if (tag == TaskTag::qa) {
    batch.distractors = reshape(slice(t_all, 0, n, n + n * per), {n, per, t_all.dim(1)});
    return qa_loss(batch, objective);
  }
  return retrieval_loss(batch, objective);
}

std::vector<LossPoint> train(WaveModel& model, const Dataset& dataset, const TrainConfig& config,
                             const ObjectiveConfig& objective, const TrainHooks& hooks) {
  config.validate();
  objective.validate();
  if (dataset.select(Split::train).empty()) throw ArgumentError("training split is empty");
  std::vector<LossPoint> trace;
  if (config.steps == 0) return trace;

  TaskAwareSampler sampler(dataset, Split::train, objective.batch_size, derive_seed(config.seed, {0x5a4}));
  const auto params = model.trainable_parameters();
  AdamW opt(params, config.optimizer);

  for (std::size_t step = 0; step < config.steps; ++step) {
    const TaskBatchPlan plan = sampler.next();
    std::mt19937_64 rng(derive_seed(config.seed, {0xd0, step}));
    ForwardOptions fo{.training = true, .rng = &rng};
    opt.zero_grad();
    const Tensor loss = batch_loss(model, dataset, plan.indices, plan.task_tag, objective, fo);
    const double value = loss.item();
    if (!std::isfinite(value)) {
      throw DivergenceError("loss became " + std::to_string(value) + " at step " + std::to_string(step) +
                            " on source '" + plan.source_tag + "'");
    }
    loss.backward();
    const double norm = clip_grad_norm(params, config.clip_norm);
    if (!std::isfinite(norm)) {
      throw DivergenceError("gradient norm became non-finite at step " + std::to_string(step));
    }
    const double lr = scheduled_lr(config.learning_rate, step, config.steps, config.warmup_fraction);
    opt.step(lr);

    trace.push_back({step + 1, plan.task_tag, plan.source_tag, value, lr, norm});
    if (hooks.on_step) hooks.on_step(trace.back());
    if (hooks.on_checkpoint && config.checkpoint_every > 0 && (step + 1) % config.checkpoint_every == 0) {
      hooks.on_checkpoint(step + 1, model);
    }
  }
  return trace;
}

double mean_loss(const std::vector<LossPoint>& trace, std::size_t begin, std::size_t end,
                 std::optional<TaskTag> tag) {
  double total = 0.0;
  std::size_t n = 0;
  for (std::size_t i = begin; i < std::min(end, trace.size()); ++i) {
    if (tag && trace[i].task_tag != *tag) continue;
    total += trace[i].loss;
    ++n;
  }
  return n ? total / static_cast<double>(n) : std::nan("");
}

std::string loss_trace_csv(const std::vector<LossPoint>& trace) {
  std::ostringstream os;
  os.precision(17);
  os << "step,task,source,loss,lr,grad_norm\n";
  for (const auto& p : trace) {
    os << p.step << ',' << to_string(p.task_tag) << ',' << p.source_tag << ',' << p.loss << ',' << p.lr
       << ',' << p.grad_norm << '\n';
  }
  return os.str();
}

void write_loss_trace(const std::vector<LossPoint>& trace, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << loss_trace_csv(trace);
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

}  // namespace wave
