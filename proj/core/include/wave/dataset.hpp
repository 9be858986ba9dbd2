#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "wave/latent.hpp"
#include "wave/sample.hpp"

namespace wave {

/// The four training tasks; each maps to one or two (task, source) groups.
enum class TaskType { video_text, video_qa, video_audio, audio_text };
inline constexpr std::array<TaskType, 4> kAllTasks = {TaskType::video_text, TaskType::video_qa,
                                                      TaskType::video_audio, TaskType::audio_text};
std::string_view to_string(TaskType task);
TaskType parse_task_type(std::string_view name);
TaskTag task_tag_of(TaskType task);

enum class Split { train, eval };
std::string_view to_string(Split split);

/// One (task, source) data group and the modalities of its (s, t) pairs.
struct GroupSpec {
  TaskType task;
  std::string source;
  ModalityKind source_kind;
  ModalityKind target_kind;
};

/// (visual, text), (audio-visual, text), QA over audio-visual clips,
/// (audio, visual), (audio, text).
const std::vector<GroupSpec>& standard_groups();
const GroupSpec& group_by_source(std::string_view source);

inline constexpr char kSourceVideoTextVisual[] = "synth-vt-visual";
inline constexpr char kSourceVideoTextAv[] = "synth-vt-av";
inline constexpr char kSourceVideoQa[] = "synth-vqa";
inline constexpr char kSourceVideoAudio[] = "synth-va";
inline constexpr char kSourceAudioText[] = "synth-at";

/// Multiple-choice sample: a question-prompted clip, its answer and n distractors.
struct QARecord {
  MultimodalSample source;
  AttributeSlot slot = AttributeSlot::object;
  Identity identity;
  std::vector<TokenId> answer;
  std::vector<std::vector<TokenId>> distractors;
  std::vector<AttributeSlot> distractor_slots;
  std::vector<std::size_t> distractor_values;
};

/// Other slots' true answers plus every wrong value of the asked slot.
constexpr std::size_t max_qa_distractors(std::size_t attribute_values) {
  return attribute_values - 1 + kAttributeSlots - 1;
}

/// Builds a QA record for a clip of class `class_id` with random attributes.
/// Distractors are the clip's true answers for the other slots (in random
/// order), then wrong values of the asked slot drawn without replacement.
/// Throws ArgumentError if n exceeds max_qa_distractors.
QARecord make_qa_record(std::size_t class_id, const LatentSpec& spec, std::size_t n,
                        std::uint64_t seed);

struct Record {
  std::uint64_t id = 0;
  Split split = Split::train;
  TaskType task = TaskType::video_text;
  TaskTag task_tag = TaskTag::retrieval;
  std::string source_tag;
  Identity identity;
  MultimodalSample source;
  MultimodalSample target;
  std::vector<MultimodalSample> distractors;  // QA only
  std::optional<AttributeSlot> slot;          // QA only
  std::size_t answer_index = 0;  // QA only: position of the answer among the candidates

  bool operator==(const Record&) const = default;

  /// QA candidates in presentation order (answer inserted at answer_index).
  std::vector<const MultimodalSample*> candidates() const;
};

struct GenerateOptions {
  std::map<TaskType, std::size_t> train_counts = {{TaskType::video_text, 8192},
                                                  {TaskType::video_qa, 4096},
                                                  {TaskType::video_audio, 4096},
                                                  {TaskType::audio_text, 4096}};
  // Eval records per group of every task with a non-zero train count.
  std::size_t eval_per_group = 256;
  std::size_t distractors = 3;
  // Make every odd train record repeat its predecessor's identity.
  bool inject_duplicates = false;
  std::size_t workers = 1;

  bool operator==(const GenerateOptions&) const = default;
};

struct DatasetHeader {
  std::string format = "wavekit-dataset";
  int version = 1;
  std::uint64_t seed = 0;
  std::string spec_digest;
  LatentParams latent;
  GenerateOptions options;

  bool operator==(const DatasetHeader&) const = default;
};

struct Dataset {
  DatasetHeader header;
  std::vector<Record> records;

  std::vector<const Record*> select(Split split, std::string_view source = {}) const;
  /// Record counts keyed "source/split".
  std::map<std::string, std::size_t> counts() const;
  std::map<TaskType, std::size_t> task_counts(Split split) const;
};

/// Deterministic per seed regardless of options.workers: every record draws
/// from its own counter-derived generator.
Dataset generate_dataset(const LatentSpec& spec, const GenerateOptions& options, std::uint64_t seed);

/// Line-delimited JSON: a header line, then one record per line. Feature
/// payloads are base64 of little-endian float64 values.
std::string serialize_dataset(const Dataset& dataset);
Dataset parse_dataset(std::string_view text);
void write_dataset(const Dataset& dataset, const std::filesystem::path& path);
Dataset read_dataset(const std::filesystem::path& path);

}  // namespace wave
