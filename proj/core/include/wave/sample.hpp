#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace wave {

using TokenId = std::uint32_t;

enum class ModalityKind { text_only, visual_only, audio_only, audio_visual };
enum class TaskTag { retrieval, qa };

std::string_view to_string(ModalityKind kind);
std::string_view to_string(TaskTag tag);
ModalityKind parse_modality_kind(std::string_view name);
TaskTag parse_task_tag(std::string_view name);

/// A sequence of per-frame feature vectors stored row-major.
struct FeatureSequence {
  std::size_t dim = 0;
  std::vector<double> values;

  std::size_t length() const { return dim ? values.size() / dim : 0; }
  bool empty() const { return values.empty(); }
  std::span<const double> frame(std::size_t i) const {
    return std::span<const double>(values).subspan(i * dim, dim);
  }
  bool operator==(const FeatureSequence&) const = default;
};

struct MultimodalSample {
  ModalityKind kind = ModalityKind::text_only;
  std::vector<TokenId> instruction;
  std::vector<TokenId> text_tokens;
  FeatureSequence frames;  // visual aligner input
  FeatureSequence speech;  // speech-encoder stream
  FeatureSequence audio;   // audio-event-encoder stream
  TaskTag task_tag = TaskTag::retrieval;
  std::string source_tag;

  bool operator==(const MultimodalSample&) const = default;

  /// Structural checks: non-text samples carry an instruction, the two audio
  /// streams are frame-synchronised, frames respect the cap. Throws
  /// AlignmentError for stream mismatch and ArgumentError otherwise.
  void validate(std::size_t max_frames) const;
};

}  // namespace wave
