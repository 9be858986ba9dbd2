#include "wave/run_config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "wave/digest.hpp"
#include "wave/errors.hpp"
#include "wave/rng.hpp"

namespace wave {

using nlohmann::json;

namespace {

// Reads one object section, recording every problem instead of stopping at the first.
class SectionReader {
 public:
  SectionReader(const json& root, std::string section, std::vector<std::string>& errors)
      : errors_(errors), section_(std::move(section)) {
    if (section_.empty()) {
      obj_ = &root;
    } else if (root.contains(section_)) {
      obj_ = &root[section_];
      if (!obj_->is_object()) {
        errors_.push_back(section_ + ": expected an object");
        obj_ = nullptr;
      }
    }
  }

  template <typename T>
  void read(const char* key, T& dst) {
    seen_.insert(key);
    if (!obj_ || !obj_->contains(key)) return;
    const json& v = (*obj_)[key];
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) return bad(key, "expected a boolean");
      dst = v.get<bool>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
        return bad(key, "expected a non-negative integer");
      }
      dst = v.get<T>();
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) return bad(key, "expected a number");
      dst = v.get<T>();
    } else {
      if (!v.is_string()) return bad(key, "expected a string");
      dst = v.get<T>();
    }
  }

  void read_strategy(const char* key, FusionStrategy& dst) {
    std::string name(to_string(dst));
    read(key, name);
    try {
      dst = parse_fusion_strategy(name);
    } catch (const Error&) {
      bad(key, "unknown fusion strategy '" + name + "'");
    }
  }

  void read_counts(const char* key, std::map<TaskType, std::size_t>& dst) {
    seen_.insert(key);
    if (!obj_ || !obj_->contains(key)) return;
    const json& v = (*obj_)[key];
    if (!v.is_object()) return bad(key, "expected an object of task counts");
    for (const auto& [name, n] : v.items()) {
      TaskType task;
      try {
        task = parse_task_type(name);
      } catch (const Error&) {
        bad(std::string(key) + "." + name, "unknown task");
        continue;
      }
      if (!n.is_number_unsigned()) {
        bad(std::string(key) + "." + name, "expected a non-negative integer");
        continue;
      }
      dst[task] = n.get<std::size_t>();
    }
  }

  void reject_unknown(const std::set<std::string>& extra_allowed = {}) {
    if (!obj_) return;
    for (const auto& [k, v] : obj_->items()) {
      if (!seen_.count(k) && !extra_allowed.count(k)) bad(k, "unknown key");
    }
  }

 private:
  void bad(const std::string& key, const std::string& msg) {
    errors_.push_back((section_.empty() ? "" : section_ + ".") + key + ": " + msg);
  }

  std::vector<std::string>& errors_;
  std::string section_;
  const json* obj_ = nullptr;
  std::set<std::string> seen_;
};

template <typename F>
void collect(std::vector<std::string>& errors, F&& check) {
  try {
    check();
  } catch (const ValidationError& e) {
    std::istringstream parts(e.what());
    std::string part;
    while (std::getline(parts, part, ';')) {
      if (!part.empty() && part[0] == ' ') part.erase(0, 1);
      errors.push_back(part);
    }
  }
}

std::string join(const std::vector<std::string>& errors) {
  std::string out = "invalid config:";
  for (const auto& e : errors) out += "\n  " + e;
  return out;
}

}  // namespace

RunConfig RunConfig::from_json(const json& j) {
  std::vector<std::string> errors;
  if (!j.is_object()) throw ValidationError("invalid config: top level must be an object");
  RunConfig c;

  SectionReader top(j, "", errors);
  top.read("seed", c.seed);
  top.read("out_dir", c.out_dir);
  top.read("data_path", c.data_path);
  top.reject_unknown({"model", "lora", "objective", "train", "data"});

  SectionReader m(j, "model", errors);
  m.read("d_model", c.model.d_model);
  m.read("n_layers", c.model.n_layers);
  m.read("n_heads", c.model.n_heads);
  m.read("d_embed", c.model.d_embed);
  m.read("d_ff", c.model.d_ff);
  m.read("fusion_hidden", c.model.fusion_hidden);
  m.read_strategy("fusion_strategy", c.model.fusion_strategy);
  m.read("max_seq_len", c.model.max_seq_len);
  m.read("max_frames", c.model.max_frames);
  m.read("vocab_size", c.model.vocab_size);
  m.read("frame_dim", c.model.frame_dim);
  m.read("speech_dim", c.model.speech_dim);
  m.read("audio_dim", c.model.audio_dim);
  m.read("rope_base", c.model.rope_base);
  m.reject_unknown();

  SectionReader l(j, "lora", errors);
  l.read("rank", c.lora.rank);
  l.read("alpha", c.lora.alpha);
  l.read("dropout", c.lora.dropout);
  l.read("enabled", c.lora.enabled);
  l.reject_unknown();

  SectionReader o(j, "objective", errors);
  o.read("temperature", c.objective.temperature);
  o.read("batch_size", c.objective.batch_size);
  o.read("distractors", c.objective.distractors);
  o.reject_unknown();

  SectionReader t(j, "train", errors);
  t.read("learning_rate", c.train.learning_rate);
  t.read("beta1", c.train.optimizer.beta1);
  t.read("beta2", c.train.optimizer.beta2);
  t.read("adam_eps", c.train.optimizer.eps);
  t.read("weight_decay", c.train.optimizer.weight_decay);
  t.read("warmup_fraction", c.train.warmup_fraction);
  t.read("steps", c.train.steps);
  t.read("clip_norm", c.train.clip_norm);
  t.read("checkpoint_every", c.train.checkpoint_every);
  t.reject_unknown();

  SectionReader d(j, "data", errors);
  d.read("num_classes", c.data.num_classes);
  d.read("attribute_values", c.data.attribute_values);
  d.read("latent_dim", c.data.latent_dim);
  d.read("noise", c.data.noise);
  d.read("min_frames", c.data.min_frames);
  d.read("max_frames", c.data.max_frames);
  d.read_counts("counts", c.data.counts);
  d.read("eval_per_group", c.data.eval_per_group);
  d.read("inject_duplicates", c.data.inject_duplicates);
  d.read("workers", c.data.workers);
  d.reject_unknown();

  try {
    c.validate();
  } catch (const ValidationError& e) {
    std::string msg = e.what();
    const std::string prefix = "invalid config:\n  ";
    if (msg.rfind(prefix, 0) == 0) msg.erase(0, prefix.size());
    std::size_t pos = 0;
    while ((pos = msg.find("\n  ")) != std::string::npos) {
      errors.push_back(msg.substr(0, pos));
      msg.erase(0, pos + 3);
    }
    errors.push_back(msg);
  }
  if (!errors.empty()) throw ValidationError(join(errors));
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path.string() + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError("invalid config: '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return from_json(j);
}

void RunConfig::validate() const {
  std::vector<std::string> errors;
  collect(errors, [&] { model.validate(); });
  collect(errors, [&] { lora.validate(); });
  collect(errors, [&] { objective.validate(); });
  collect(errors, [&] { train.validate(); });
  collect(errors, [&] { latent_params().validate(); });
  if (data.max_frames > model.max_frames) errors.push_back("data.max_frames exceeds model.max_frames");
  const Vocabulary vocab(data.num_classes, data.attribute_values);
  if (vocab.size() > model.vocab_size) {
    errors.push_back("model.vocab_size must be at least " + std::to_string(vocab.size()) + " for this data");
  }
  // Longest sequence: three tokens per frame plus a two-token prompt.
  if (3 * data.max_frames + 2 > model.max_seq_len) {
    errors.push_back("model.max_seq_len is too short for data.max_frames");
  }
  if (objective.distractors > max_qa_distractors(data.attribute_values)) {
    errors.push_back("objective.distractors must be at most data.attribute_values + 1");
  }
  const std::size_t combos = data.attribute_values * data.attribute_values * data.attribute_values;
  if (data.eval_per_group > data.num_classes * combos) {
    errors.push_back("data.eval_per_group exceeds the number of distinct identities");
  }
  if (data.workers < 1) errors.push_back("data.workers must be >= 1");
  if (!errors.empty()) throw ValidationError(join(errors));
}

json RunConfig::to_json() const {
  json counts = json::object();
  for (const auto& [task, n] : data.counts) counts[std::string(to_string(task))] = n;
  return json{
      {"seed", seed},
      {"out_dir", out_dir},
      {"data_path", data_path},
      {"model",
       {{"d_model", model.d_model},
        {"n_layers", model.n_layers},
        {"n_heads", model.n_heads},
        {"d_embed", model.d_embed},
        {"d_ff", model.d_ff},
        {"fusion_hidden", model.fusion_hidden},
        {"fusion_strategy", to_string(model.fusion_strategy)},
        {"max_seq_len", model.max_seq_len},
        {"max_frames", model.max_frames},
        {"vocab_size", model.vocab_size},
        {"frame_dim", model.frame_dim},
        {"speech_dim", model.speech_dim},
        {"audio_dim", model.audio_dim},
        {"rope_base", model.rope_base}}},
      {"lora", {{"rank", lora.rank}, {"alpha", lora.alpha}, {"dropout", lora.dropout}, {"enabled", lora.enabled}}},
      {"objective",
       {{"temperature", objective.temperature},
        {"batch_size", objective.batch_size},
        {"distractors", objective.distractors}}},
      {"train",
       {{"learning_rate", train.learning_rate},
        {"beta1", train.optimizer.beta1},
        {"beta2", train.optimizer.beta2},
        {"adam_eps", train.optimizer.eps},
        {"weight_decay", train.optimizer.weight_decay},
        {"warmup_fraction", train.warmup_fraction},
        {"steps", train.steps},
        {"clip_norm", train.clip_norm},
        {"checkpoint_every", train.checkpoint_every}}},
      {"data",
       {{"num_classes", data.num_classes},
        {"attribute_values", data.attribute_values},
        {"latent_dim", data.latent_dim},
        {"noise", data.noise},
        {"min_frames", data.min_frames},
        {"max_frames", data.max_frames},
        {"counts", counts},
        {"eval_per_group", data.eval_per_group},
        {"inject_duplicates", data.inject_duplicates},
        {"workers", data.workers}}},
  };
}

std::string RunConfig::digest() const { return sha256_hex(to_json().dump()); }

std::uint64_t RunConfig::latent_seed() const { return derive_seed(seed, {1}); }
std::uint64_t RunConfig::data_seed() const { return derive_seed(seed, {2}); }
std::uint64_t RunConfig::model_seed() const { return derive_seed(seed, {3}); }
std::uint64_t RunConfig::train_seed() const { return derive_seed(seed, {4}); }

LatentParams RunConfig::latent_params() const {
  LatentParams p;
  p.num_classes = data.num_classes;
  p.attribute_values = data.attribute_values;
  p.latent_dim = data.latent_dim;
  p.frame_dim = model.frame_dim;
  p.speech_dim = model.speech_dim;
  p.audio_dim = model.audio_dim;
  p.noise = data.noise;
  p.min_frames = data.min_frames;
  p.max_frames = data.max_frames;
  p.seed = latent_seed();
  return p;
}

GenerateOptions RunConfig::generate_options() const {
  GenerateOptions o;
  o.train_counts = data.counts;
  o.eval_per_group = data.eval_per_group;
  o.distractors = objective.distractors;
  o.inject_duplicates = data.inject_duplicates;
  o.workers = data.workers;
  return o;
}

TrainConfig RunConfig::resolved_train() const {
  TrainConfig t = train;
  t.seed = train_seed();
  return t;
}

}  // namespace wave
