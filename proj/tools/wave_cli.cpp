// wave: generate synthetic data, train, evaluate, ablate and run the
// prompt-conditioning demo from one JSON config.

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "wave/ablation.hpp"
#include "wave/checkpoint.hpp"
#include "wave/dataset.hpp"
#include "wave/demo.hpp"
#include "wave/errors.hpp"
#include "wave/evaluate.hpp"
#include "wave/latent.hpp"
#include "wave/model.hpp"
#include "wave/run_config.hpp"
#include "wave/train.hpp"

namespace fs = std::filesystem;
using namespace wave;

namespace {

enum ExitCode { kOk = 0, kValidation = 1, kIo = 2, kDivergence = 3 };

struct CommonArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string data;
  std::string checkpoint;
  std::vector<std::string> counts;
  std::size_t samples = 64;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config, "JSON run config (defaults apply to missing keys)");
  cmd->add_option("--seed", args.seed, "Override the config seed");
  cmd->add_option("--out", args.out, "Output directory (overrides config out_dir)");
}

// Applies --count task=N. "retrieval" sets every retrieval task, "qa" the QA task.
void apply_counts(RunConfig& cfg, const std::vector<std::string>& counts) {
  for (const auto& item : counts) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ValidationError("--count expects task=N, got '" + item + "'");
    const std::string name = item.substr(0, eq);
    std::size_t n = 0;
    try {
      std::size_t used = 0;
      n = std::stoull(item.substr(eq + 1), &used);
      if (used != item.size() - eq - 1) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ValidationError("--count value for '" + name + "' is not a non-negative integer");
    }
    if (name == "retrieval") {
      for (auto t : {TaskType::video_text, TaskType::video_audio, TaskType::audio_text}) cfg.data.counts[t] = n;
    } else if (name == "qa") {
      cfg.data.counts[TaskType::video_qa] = n;
    } else {
      try {
        cfg.data.counts[parse_task_type(name)] = n;
      } catch (const ArgumentError& e) {
        throw ValidationError(std::string("--count: ") + e.what());
      }
    }
  }
}

RunConfig resolve_config(const CommonArgs& args) {
  RunConfig cfg = args.config.empty() ? RunConfig{} : RunConfig::load(args.config);
  if (args.seed) cfg.seed = *args.seed;
  if (!args.out.empty()) cfg.out_dir = args.out;
  if (!args.data.empty()) cfg.data_path = args.data;
  apply_counts(cfg, args.counts);
  cfg.validate();
  return cfg;
}

fs::path prepare_out(const RunConfig& cfg) {
  const fs::path out(cfg.out_dir);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec || !fs::is_directory(out)) throw IoError("cannot create output directory '" + out.string() + "'");
  return out;
}

void write_snapshot(const RunConfig& cfg, const fs::path& out) {
  const fs::path path = out / "resolved_config.json";
  std::ofstream os(path);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  os << cfg.to_json().dump(2) << '\n';
  if (!os) throw IoError("failed writing '" + path.string() + "'");
}

Dataset obtain_dataset(const RunConfig& cfg) {
  if (!cfg.data_path.empty()) {
    if (!fs::exists(cfg.data_path)) throw IoError("dataset '" + cfg.data_path + "' does not exist");
    return read_dataset(cfg.data_path);
  }
  const LatentSpec spec = LatentSpec::generate(cfg.latent_params());
  return generate_dataset(spec, cfg.generate_options(), cfg.data_seed());
}

void print_counts(const Dataset& ds) {
  for (auto split : {Split::train, Split::eval}) {
    const auto counts = ds.task_counts(split);
    for (auto task : kAllTasks) {
      const auto it = counts.find(task);
      std::cout << to_string(split) << ' ' << to_string(task) << ' ' << (it == counts.end() ? 0 : it->second)
                << '\n';
    }
  }
}

int cmd_generate(const CommonArgs& args) {
  const RunConfig cfg = resolve_config(args);
  const fs::path out = prepare_out(cfg);
  const LatentSpec spec = LatentSpec::generate(cfg.latent_params());
  const Dataset ds = generate_dataset(spec, cfg.generate_options(), cfg.data_seed());
  const fs::path path = out / "dataset.jsonl";
  write_dataset(ds, path);
  write_snapshot(cfg, out);
  print_counts(ds);
  std::cout << "wrote " << ds.records.size() << " records to " << path.string() << '\n';
  return kOk;
}

int cmd_train(const CommonArgs& args) {
  const RunConfig cfg = resolve_config(args);
  const fs::path out = prepare_out(cfg);
  write_snapshot(cfg, out);
  const Dataset ds = obtain_dataset(cfg);
  WaveModel model(cfg.model, cfg.lora, cfg.model_seed());
  const auto t0 = std::chrono::steady_clock::now();
  TrainHooks hooks;
  hooks.on_step = [&](const LossPoint& p) {
    if (p.step % 100 == 0) {
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      std::cerr << "step " << p.step << "/" << cfg.train.steps << " loss " << p.loss << " (" << secs
                << " s)\n";
    }
  };
  hooks.on_checkpoint = [&](std::size_t step, const WaveModel& m) {
    save_checkpoint(m, out / ("checkpoint-" + std::to_string(step) + ".bin"));
  };
  std::vector<LossPoint> trace;
  try {
    trace = train(model, ds, cfg.resolved_train(), cfg.objective, hooks);
  } catch (const DivergenceError&) {
    save_checkpoint(model, out / "diverged.bin");
    throw;
  }
  save_checkpoint(model, out / "checkpoint.bin");
  write_loss_trace(trace, out / "loss_trace.csv");
  std::cout << "trained " << trace.size() << " steps; checkpoint " << (out / "checkpoint.bin").string() << '\n';
  return kOk;
}

WaveModel load_model(const RunConfig& cfg, const std::string& checkpoint) {
  if (checkpoint.empty()) throw ValidationError("--checkpoint is required");
  if (!fs::exists(checkpoint)) throw IoError("checkpoint '" + checkpoint + "' does not exist");
  WaveModel model(cfg.model, cfg.lora, cfg.model_seed());
  load_checkpoint(model, checkpoint);
  return model;
}

int cmd_eval(const CommonArgs& args) {
  const RunConfig cfg = resolve_config(args);
  WaveModel model = load_model(cfg, args.checkpoint);
  const fs::path out = prepare_out(cfg);
  write_snapshot(cfg, out);
  const Dataset ds = obtain_dataset(cfg);

  EvalReport report;
  report.seed = cfg.seed;
  report.config_digest = cfg.digest();
  report.learning_rate = cfg.train.learning_rate;
  report.reference_learning_rate = TrainConfig::kReferenceLearningRate;
  for (const auto& dir : standard_directions()) {
    if (ds.select(Split::eval, dir.source).empty()) continue;
    report.retrieval.push_back(evaluate_retrieval(model, ds, dir));
  }
  if (!ds.select(Split::eval, kSourceVideoQa).empty()) {
    for (auto mode : {QaPromptMode::per_question, QaPromptMode::common_prompt}) {
      report.qa.push_back(evaluate_qa(model, ds, mode));
    }
  }
  report.write(out / "eval_report.json", out / "eval_report.csv");
  for (const auto& m : report.retrieval) {
    std::cout << m.direction << " R@1 " << m.r1 << " R@5 " << m.r5 << " R@10 " << m.r10 << " (pool "
              << m.pool_size << ")\n";
  }
  for (const auto& m : report.qa) std::cout << "qa " << to_string(m.mode) << " accuracy " << m.accuracy << '\n';
  return kOk;
}

int cmd_ablate(const CommonArgs& args) {
  const RunConfig cfg = resolve_config(args);
  const fs::path out = prepare_out(cfg);
  write_snapshot(cfg, out);
  const Dataset ds = obtain_dataset(cfg);
  AblationSetup setup{cfg.model, cfg.lora, cfg.objective, cfg.resolved_train(), cfg.model_seed()};
  const auto table = run_fusion_ablation(setup, ds, {kAllFusionStrategies.begin(), kAllFusionStrategies.end()},
                                         [](FusionStrategy s, const std::vector<LossPoint>& trace) {
                                           std::cerr << "trained " << to_string(s) << " (" << trace.size()
                                                     << " steps)\n";
                                         });
  table.write_csv(out / "ablation.csv");
  std::cout << table.to_csv();
  return kOk;
}

int cmd_demo(const CommonArgs& args) {
  const RunConfig cfg = resolve_config(args);
  WaveModel model = load_model(cfg, args.checkpoint);
  const fs::path out = prepare_out(cfg);
  write_snapshot(cfg, out);
  const Dataset ds = obtain_dataset(cfg);
  const DemoSummary summary = run_prompt_demo(model, ds, args.samples);
  if (summary.samples == 0) throw ValidationError("dataset has no audio-visual eval clips for the demo");
  summary.first.write_csv(out / "demo_similarity.csv");
  nlohmann::json j{{"samples", summary.samples},
                   {"all_slots_matched", summary.all_slots_matched},
                   {"sample_accuracy", summary.sample_accuracy()}};
  for (std::size_t s = 0; s < kAttributeSlots; ++s) {
    j["slot_matched"][std::string(to_string(kAllSlots[s]))] = summary.slot_matched[s];
  }
  std::ofstream os(out / "demo_summary.json");
  if (!os) throw IoError("cannot write demo summary");
  os << j.dump(2) << '\n';
  std::cout << summary.first.to_csv();
  std::cout << "argmax pattern held on " << summary.all_slots_matched << "/" << summary.samples << " samples\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"wave: toy audio-visual embedding toolkit"};
  app.require_subcommand(1);
  CommonArgs args;

  auto* gen = app.add_subcommand("generate", "Generate a synthetic dataset into OUT/dataset.jsonl");
  add_common(gen, args);
  gen->add_option("--count", args.counts, "Train records per task: task=N (task or 'retrieval'/'qa')");

  auto* tr = app.add_subcommand("train", "Train a model; writes checkpoint.bin and loss_trace.csv");
  add_common(tr, args);
  tr->add_option("--data", args.data, "Dataset file (default: generate from the config)");
  tr->add_option("--count", args.counts, "Train records per task when generating in memory");

  auto* ev = app.add_subcommand("eval", "Evaluate retrieval and QA; writes eval_report.{json,csv}");
  add_common(ev, args);
  ev->add_option("--data", args.data, "Dataset file (default: generate from the config)");
  ev->add_option("--checkpoint", args.checkpoint, "Checkpoint to evaluate")->required();

  auto* ab = app.add_subcommand("ablate", "Train and score every fusion strategy; writes ablation.csv");
  add_common(ab, args);
  ab->add_option("--data", args.data, "Dataset file (default: generate from the config)");
  ab->add_option("--count", args.counts, "Train records per task when generating in memory");

  auto* dm = app.add_subcommand("demo", "Prompt-conditioned similarity matrix; writes demo_similarity.csv");
  add_common(dm, args);
  dm->add_option("--data", args.data, "Dataset file (default: generate from the config)");
  dm->add_option("--checkpoint", args.checkpoint, "Checkpoint to use")->required();
  dm->add_option("--samples", args.samples, "Eval clips to check the argmax pattern on");

  auto* defaults = app.add_subcommand("defaults", "Print the default config");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kValidation;
  }

  try {
    if (*gen) return cmd_generate(args);
    if (*tr) return cmd_train(args);
    if (*ev) return cmd_eval(args);
    if (*ab) return cmd_ablate(args);
    if (*dm) return cmd_demo(args);
    if (*defaults) {
      std::cout << RunConfig{}.to_json().dump(2) << '\n';
      return kOk;
    }
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIo;
  } catch (const DivergenceError& e) {
    std::cerr << "error: training diverged: " << e.what() << '\n';
    return kDivergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kValidation;
  }
  return kOk;
}
