#include "wave/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "wave/digest.hpp"
#include "wave/errors.hpp"
#include "wave/rng.hpp"

namespace wave {

using nlohmann::json;

std::string_view to_string(TaskType task) {
  switch (task) {
    case TaskType::video_text:
      return "video_text";
    case TaskType::video_qa:
      return "video_qa";
    case TaskType::video_audio:
      return "video_audio";
    case TaskType::audio_text:
      return "audio_text";
  }
  return "unknown";
}

TaskType parse_task_type(std::string_view name) {
  for (auto t : kAllTasks) {
    if (to_string(t) == name) return t;
  }
  throw ArgumentError("unknown task '" + std::string(name) + "'");
}

TaskTag task_tag_of(TaskType task) {
  return task == TaskType::video_qa ? TaskTag::qa : TaskTag::retrieval;
}

std::string_view to_string(Split split) { return split == Split::train ? "train" : "eval"; }

namespace {

Split parse_split(std::string_view name) {
  if (name == "train") return Split::train;
  if (name == "eval") return Split::eval;
  throw ArgumentError("unknown split '" + std::string(name) + "'");
}

}  // namespace

const std::vector<GroupSpec>& standard_groups() {
  static const std::vector<GroupSpec> groups = {
      {TaskType::video_text, kSourceVideoTextVisual, ModalityKind::visual_only, ModalityKind::text_only},
      {TaskType::video_text, kSourceVideoTextAv, ModalityKind::audio_visual, ModalityKind::text_only},
      {TaskType::video_qa, kSourceVideoQa, ModalityKind::audio_visual, ModalityKind::text_only},
      {TaskType::video_audio, kSourceVideoAudio, ModalityKind::audio_only, ModalityKind::visual_only},
      {TaskType::audio_text, kSourceAudioText, ModalityKind::audio_only, ModalityKind::text_only},
  };
  return groups;
}

const GroupSpec& group_by_source(std::string_view source) {
  for (const auto& g : standard_groups()) {
    if (g.source == source) return g;
  }
  throw ArgumentError("unknown data source '" + std::string(source) + "'");
}

std::vector<const MultimodalSample*> Record::candidates() const {
  std::vector<const MultimodalSample*> out;
  out.reserve(distractors.size() + 1);
  for (const auto& d : distractors) out.push_back(&d);
  const std::size_t at = std::min(answer_index, out.size());
  out.insert(out.begin() + static_cast<std::ptrdiff_t>(at), &target);
  return out;
}

namespace {

std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

// Renders the non-text side of a sample with the given modality kind.
MultimodalSample render_sample(const LatentSpec& spec, const Vocabulary& vocab, ModalityKind kind,
                               const Identity& id, std::size_t frames, std::mt19937_64& rng) {
  MultimodalSample s;
  s.kind = kind;
  switch (kind) {
    case ModalityKind::text_only:
      s.text_tokens = vocab.caption(id);
      break;
    case ModalityKind::visual_only:
      s.instruction = vocab.describe_video_prompt();
      s.frames = spec.render(Stream::visual, id, frames, rng);
      break;
    case ModalityKind::audio_only:
      s.instruction = vocab.describe_audio_prompt();
      s.speech = spec.render(Stream::speech, id, frames, rng);
      s.audio = spec.render(Stream::audio, id, frames, rng);
      break;
    case ModalityKind::audio_visual:
      s.instruction = vocab.describe_video_prompt();
      s.frames = spec.render(Stream::visual, id, frames, rng);
      s.speech = spec.render(Stream::speech, id, frames, rng);
      s.audio = spec.render(Stream::audio, id, frames, rng);
      break;
  }
  return s;
}

std::size_t draw_frames(const LatentParams& p, std::mt19937_64& rng) {
  return std::uniform_int_distribution<std::size_t>(p.min_frames, p.max_frames)(rng);
}

template <typename T>
void shuffle_in_place(std::vector<T>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[uniform_index(rng, i)]);
}

Identity random_identity(std::size_t class_id, std::size_t values, std::mt19937_64& rng) {
  Identity id;
  id.class_id = class_id;
  for (auto& a : id.attributes) a = uniform_index(rng, values);
  return id;
}

QARecord build_qa(const Identity& id, AttributeSlot slot, const LatentSpec& spec, std::size_t n,
                  std::mt19937_64& rng) {
  const auto& p = spec.params();
  if (n > max_qa_distractors(p.attribute_values)) {
    throw ArgumentError("qa distractor count " + std::to_string(n) + " exceeds " +
                        std::to_string(max_qa_distractors(p.attribute_values)) + " available answers");
  }
  const Vocabulary vocab(p.num_classes, p.attribute_values);
  QARecord qa;
  qa.identity = id;
  qa.slot = slot;
  qa.source = render_sample(spec, vocab, ModalityKind::audio_visual, id, draw_frames(p, rng), rng);
  qa.source.instruction = vocab.question_prompt(slot);
  qa.source.task_tag = TaskTag::qa;
  qa.answer = vocab.answer(slot, id.attribute(slot));

  // Hard distractors first: true answers about the clip's other slots, which
  // only the question can rule out. Then wrong values of the asked slot.
  std::vector<std::pair<AttributeSlot, std::size_t>> hard, wrong;
  for (auto other : kAllSlots) {
    if (other != slot) hard.emplace_back(other, id.attribute(other));
  }
  for (std::size_t v = 0; v < p.attribute_values; ++v) {
    if (v != id.attribute(slot)) wrong.emplace_back(slot, v);
  }
  shuffle_in_place(hard, rng);
  shuffle_in_place(wrong, rng);
  hard.insert(hard.end(), wrong.begin(), wrong.end());
  for (std::size_t i = 0; i < n; ++i) {
    qa.distractor_slots.push_back(hard[i].first);
    qa.distractor_values.push_back(hard[i].second);
    qa.distractors.push_back(vocab.answer(hard[i].first, hard[i].second));
  }
  return qa;
}

MultimodalSample text_sample(std::vector<TokenId> tokens, TaskTag tag, const std::string& source) {
  MultimodalSample s;
  s.kind = ModalityKind::text_only;
  s.text_tokens = std::move(tokens);
  s.task_tag = tag;
  s.source_tag = source;
  return s;
}

// Eval identities: class i mod C, attribute combination taken from a per-class
// permutation so no two eval records of a group share an identity.
Identity eval_identity(std::size_t i, std::size_t group, const LatentParams& p, std::uint64_t seed) {
  const std::size_t c = i % p.num_classes;
  const std::size_t combos = p.attribute_values * p.attribute_values * p.attribute_values;
  const std::size_t k = i / p.num_classes;
  if (k >= combos) {
    throw ArgumentError("eval group of " + std::to_string(i + 1) +
                        " records exceeds the number of distinct identities");
  }
  std::vector<std::size_t> perm(combos);
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(derive_seed(seed, {0xe7a1, group, c}));
  std::shuffle(perm.begin(), perm.end(), rng);
  std::size_t code = perm[k];
  Identity id;
  id.class_id = c;
  for (auto& a : id.attributes) {
    a = code % p.attribute_values;
    code /= p.attribute_values;
  }
  return id;
}

struct Job {
  std::size_t group = 0;
  Split split = Split::train;
  std::size_t index = 0;
};

Record make_record(const LatentSpec& spec, const GenerateOptions& options, std::uint64_t seed,
                   const Job& job) {
  const auto& p = spec.params();
  const auto& g = standard_groups()[job.group];
  const Vocabulary vocab(p.num_classes, p.attribute_values);

  Identity id;
  if (job.split == Split::eval) {
    id = eval_identity(job.index, job.group, p, seed);
  } else {
    // With duplicates injected, odd records reuse their predecessor's identity.
    const std::size_t base = options.inject_duplicates ? job.index & ~std::size_t{1} : job.index;
    std::mt19937_64 id_rng(derive_seed(seed, {0x1d, job.group, base}));
    id = random_identity(base % p.num_classes, p.attribute_values, id_rng);
  }

  std::mt19937_64 rng(derive_seed(seed, {0x5a, job.group, static_cast<std::uint64_t>(job.split), job.index}));
  Record r;
  r.split = job.split;
  r.task = g.task;
  r.task_tag = task_tag_of(g.task);
  r.source_tag = g.source;
  r.identity = id;

  if (g.task == TaskType::video_qa) {
    const auto slot = kAllSlots[uniform_index(rng, kAttributeSlots)];
    QARecord qa = build_qa(id, slot, spec, options.distractors, rng);
    r.source = std::move(qa.source);
    r.source.source_tag = g.source;
    r.target = text_sample(std::move(qa.answer), TaskTag::qa, g.source);
    for (auto& d : qa.distractors) r.distractors.push_back(text_sample(std::move(d), TaskTag::qa, g.source));
    r.slot = slot;
    r.answer_index = uniform_index(rng, options.distractors + 1);
    return r;
  }

  const std::size_t frames = draw_frames(p, rng);
  r.source = render_sample(spec, vocab, g.source_kind, id, frames, rng);
  r.target = render_sample(spec, vocab, g.target_kind, id, frames, rng);
  for (auto* s : {&r.source, &r.target}) {
    s->task_tag = r.task_tag;
    s->source_tag = g.source;
  }
  return r;
}

}  // namespace

QARecord make_qa_record(std::size_t class_id, const LatentSpec& spec, std::size_t n, std::uint64_t seed) {
  const auto& p = spec.params();
  if (class_id >= p.num_classes) {
    throw ArgumentError("class " + std::to_string(class_id) + " out of range");
  }
  std::mt19937_64 rng(derive_seed(seed, {0x9a, class_id}));
  const Identity id = random_identity(class_id, p.attribute_values, rng);
  const auto slot = kAllSlots[uniform_index(rng, kAttributeSlots)];
  return build_qa(id, slot, spec, n, rng);
}

Dataset generate_dataset(const LatentSpec& spec, const GenerateOptions& options, std::uint64_t seed) {
  if (options.distractors < 1) throw ArgumentError("distractors must be >= 1");
  if (options.distractors > max_qa_distractors(spec.params().attribute_values)) {
    throw ArgumentError("distractors must be at most data.attribute_values + 1");
  }
  Dataset ds;
  ds.header.seed = seed;
  ds.header.spec_digest = spec.digest();
  ds.header.latent = spec.params();
  ds.header.options = options;

  std::vector<Job> jobs;
  const auto& groups = standard_groups();
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    const TaskType task = groups[gi].task;
    const auto it = options.train_counts.find(task);
    const std::size_t task_count = it == options.train_counts.end() ? 0 : it->second;
    if (task_count == 0) continue;
    std::size_t n = task_count;
    // video_text splits its count across the visual and audio-visual sources.
    if (task == TaskType::video_text) {
      n = groups[gi].source == kSourceVideoTextVisual ? (task_count + 1) / 2 : task_count / 2;
    }
    for (std::size_t i = 0; i < n; ++i) jobs.push_back({gi, Split::train, i});
    for (std::size_t i = 0; i < options.eval_per_group; ++i) jobs.push_back({gi, Split::eval, i});
  }

  ds.records.resize(jobs.size());
  const std::size_t workers = std::max<std::size_t>(1, std::min(options.workers, jobs.size()));
  auto run = [&](std::size_t w) {
    for (std::size_t j = w; j < jobs.size(); j += workers) {
      ds.records[j] = make_record(spec, options, seed, jobs[j]);
      ds.records[j].id = j;
    }
  };
  if (workers == 1) {
    run(0);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(run, w);
  }
  return ds;
}

std::vector<const Record*> Dataset::select(Split split, std::string_view source) const {
  std::vector<const Record*> out;
  for (const auto& r : records) {
    if (r.split == split && (source.empty() || r.source_tag == source)) out.push_back(&r);
  }
  return out;
}

std::map<std::string, std::size_t> Dataset::counts() const {
  std::map<std::string, std::size_t> out;
  for (const auto& r : records) ++out[r.source_tag + "/" + std::string(to_string(r.split))];
  return out;
}

std::map<TaskType, std::size_t> Dataset::task_counts(Split split) const {
  std::map<TaskType, std::size_t> out;
  for (const auto& r : records) {
    if (r.split == split) ++out[r.task];
  }
  return out;
}

// ---- serialization -------------------------------------------------------

namespace {

json features_to_json(const FeatureSequence& f) {
  return json{{"dim", f.dim}, {"data", encode_f64_le(f.values)}};
}

FeatureSequence features_from_json(const json& j) {
  FeatureSequence f;
  f.dim = j.at("dim").get<std::size_t>();
  f.values = decode_f64_le(j.at("data").get<std::string>());
  if (f.dim == 0 ? !f.values.empty() : f.values.size() % f.dim != 0) {
    throw ValidationError("feature payload length is not a multiple of its dim");
  }
  return f;
}

json sample_to_json(const MultimodalSample& s) {
  json j{{"kind", to_string(s.kind)}, {"task_tag", to_string(s.task_tag)}, {"source_tag", s.source_tag}};
  if (!s.instruction.empty()) j["instruction"] = s.instruction;
  if (!s.text_tokens.empty()) j["text"] = s.text_tokens;
  if (s.frames.dim || !s.frames.empty()) j["frames"] = features_to_json(s.frames);
  if (s.speech.dim || !s.speech.empty()) j["speech"] = features_to_json(s.speech);
  if (s.audio.dim || !s.audio.empty()) j["audio"] = features_to_json(s.audio);
  return j;
}

MultimodalSample sample_from_json(const json& j) {
  MultimodalSample s;
  s.kind = parse_modality_kind(j.at("kind").get<std::string>());
  s.task_tag = parse_task_tag(j.at("task_tag").get<std::string>());
  s.source_tag = j.at("source_tag").get<std::string>();
  if (j.contains("instruction")) s.instruction = j["instruction"].get<std::vector<TokenId>>();
  if (j.contains("text")) s.text_tokens = j["text"].get<std::vector<TokenId>>();
  if (j.contains("frames")) s.frames = features_from_json(j["frames"]);
  if (j.contains("speech")) s.speech = features_from_json(j["speech"]);
  if (j.contains("audio")) s.audio = features_from_json(j["audio"]);
  return s;
}

json record_to_json(const Record& r) {
  json j{{"id", r.id},
         {"split", to_string(r.split)},
         {"task", to_string(r.task)},
         {"task_tag", to_string(r.task_tag)},
         {"source_tag", r.source_tag},
         {"identity", {{"class", r.identity.class_id}, {"attributes", r.identity.attributes}}},
         {"source", sample_to_json(r.source)},
         {"target", sample_to_json(r.target)}};
  if (!r.distractors.empty()) {
    json d = json::array();
    for (const auto& s : r.distractors) d.push_back(sample_to_json(s));
    j["distractors"] = std::move(d);
    j["answer_index"] = r.answer_index;
  }
  if (r.slot) j["slot"] = to_string(*r.slot);
  return j;
}

Record record_from_json(const json& j) {
  Record r;
  r.id = j.at("id").get<std::uint64_t>();
  r.split = parse_split(j.at("split").get<std::string>());
  r.task = parse_task_type(j.at("task").get<std::string>());
  r.task_tag = parse_task_tag(j.at("task_tag").get<std::string>());
  r.source_tag = j.at("source_tag").get<std::string>();
  r.identity.class_id = j.at("identity").at("class").get<std::size_t>();
  r.identity.attributes = j.at("identity").at("attributes").get<std::array<std::size_t, kAttributeSlots>>();
  r.source = sample_from_json(j.at("source"));
  r.target = sample_from_json(j.at("target"));
  if (j.contains("distractors")) {
    for (const auto& d : j["distractors"]) r.distractors.push_back(sample_from_json(d));
    r.answer_index = j.at("answer_index").get<std::size_t>();
  }
  if (j.contains("slot")) r.slot = parse_attribute_slot(j["slot"].get<std::string>());
  return r;
}

json header_to_json(const DatasetHeader& h) {
  const auto& l = h.latent;
  json counts = json::object();
  for (const auto& [task, n] : h.options.train_counts) counts[std::string(to_string(task))] = n;
  return json{{"format", h.format},
              {"version", h.version},
              {"seed", h.seed},
              {"spec_digest", h.spec_digest},
              {"latent",
               {{"num_classes", l.num_classes},
                {"attribute_values", l.attribute_values},
                {"latent_dim", l.latent_dim},
                {"frame_dim", l.frame_dim},
                {"speech_dim", l.speech_dim},
                {"audio_dim", l.audio_dim},
                {"noise", l.noise},
                {"min_frames", l.min_frames},
                {"max_frames", l.max_frames},
                {"seed", l.seed}}},
              {"options",
               {{"train_counts", counts},
                {"eval_per_group", h.options.eval_per_group},
                {"distractors", h.options.distractors},
                {"inject_duplicates", h.options.inject_duplicates},
                {"workers", h.options.workers}}}};
}

DatasetHeader header_from_json(const json& j) {
  DatasetHeader h;
  h.format = j.at("format").get<std::string>();
  if (h.format != "wavekit-dataset") throw ValidationError("not a wavekit dataset (format '" + h.format + "')");
  h.version = j.at("version").get<int>();
  if (h.version != 1) throw ValidationError("unsupported dataset version " + std::to_string(h.version));
  h.seed = j.at("seed").get<std::uint64_t>();
  h.spec_digest = j.at("spec_digest").get<std::string>();
  const auto& l = j.at("latent");
  h.latent.num_classes = l.at("num_classes").get<std::size_t>();
  h.latent.attribute_values = l.at("attribute_values").get<std::size_t>();
  h.latent.latent_dim = l.at("latent_dim").get<std::size_t>();
  h.latent.frame_dim = l.at("frame_dim").get<std::size_t>();
  h.latent.speech_dim = l.at("speech_dim").get<std::size_t>();
  h.latent.audio_dim = l.at("audio_dim").get<std::size_t>();
  h.latent.noise = l.at("noise").get<double>();
  h.latent.min_frames = l.at("min_frames").get<std::size_t>();
  h.latent.max_frames = l.at("max_frames").get<std::size_t>();
  h.latent.seed = l.at("seed").get<std::uint64_t>();
  const auto& o = j.at("options");
  h.options.train_counts.clear();
  for (const auto& [name, n] : o.at("train_counts").items()) {
    h.options.train_counts[parse_task_type(name)] = n.get<std::size_t>();
  }
  h.options.eval_per_group = o.at("eval_per_group").get<std::size_t>();
  h.options.distractors = o.at("distractors").get<std::size_t>();
  h.options.inject_duplicates = o.at("inject_duplicates").get<bool>();
  h.options.workers = o.at("workers").get<std::size_t>();
  return h;
}

}  // namespace

std::string serialize_dataset(const Dataset& dataset) {
  std::string out = header_to_json(dataset.header).dump();
  out += '\n';
  for (const auto& r : dataset.records) {
    out += record_to_json(r).dump();
    out += '\n';
  }
  return out;
}

Dataset parse_dataset(std::string_view text) {
  Dataset ds;
  std::size_t line_no = 0;
  bool have_header = false;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    const std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      if (!have_header) {
        ds.header = header_from_json(j);
        have_header = true;
      } else {
        ds.records.push_back(record_from_json(j));
      }
    } catch (const json::exception& e) {
      throw ValidationError("dataset line " + std::to_string(line_no) + ": " + e.what());
    } catch (const ArgumentError& e) {
      throw ValidationError("dataset line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!have_header) throw ValidationError("dataset has no header line");
  return ds;
}

void write_dataset(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  const std::string text = serialize_dataset(dataset);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

Dataset read_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open dataset '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_dataset(buf.str());
}

}  // namespace wave
