#include "wave/sample.hpp"

#include "wave/errors.hpp"

namespace wave {

std::string_view to_string(ModalityKind kind) {
  switch (kind) {
    case ModalityKind::text_only:
      return "text_only";
    case ModalityKind::visual_only:
      return "visual_only";
    case ModalityKind::audio_only:
      return "audio_only";
    case ModalityKind::audio_visual:
      return "audio_visual";
  }
  return "unknown";
}

std::string_view to_string(TaskTag tag) { return tag == TaskTag::qa ? "qa" : "retrieval"; }

ModalityKind parse_modality_kind(std::string_view name) {
  for (auto k : {ModalityKind::text_only, ModalityKind::visual_only, ModalityKind::audio_only,
                 ModalityKind::audio_visual}) {
    if (to_string(k) == name) return k;
  }
  throw ArgumentError("unknown modality kind '" + std::string(name) + "'");
}

TaskTag parse_task_tag(std::string_view name) {
  if (name == "retrieval") return TaskTag::retrieval;
  if (name == "qa") return TaskTag::qa;
  throw ArgumentError("unknown task tag '" + std::string(name) + "'");
}

void MultimodalSample::validate(std::size_t max_frames) const {
  const bool has_frames = !frames.empty();
  const bool has_audio = !speech.empty() || !audio.empty();
  if (!speech.empty() && !audio.empty() && speech.length() != audio.length()) {
    throw AlignmentError("speech stream has " + std::to_string(speech.length()) +
                         " frames but audio stream has " + std::to_string(audio.length()));
  }
  for (const FeatureSequence* seq : {&frames, &speech, &audio}) {
    if (!seq->empty() && (seq->dim == 0 || seq->values.size() % seq->dim != 0)) {
      throw ArgumentError("feature payload is not a whole number of frames");
    }
  }
  if (frames.length() > max_frames) {
    throw ArgumentError("sample has " + std::to_string(frames.length()) +
                        " frames, cap is " + std::to_string(max_frames));
  }
  const std::string kind_name(to_string(kind));
  switch (kind) {
    case ModalityKind::text_only:
      if (has_frames || has_audio) throw ArgumentError("text_only sample carries features");
      if (text_tokens.empty() && instruction.empty()) throw ArgumentError("text_only sample is empty");
      return;
    case ModalityKind::visual_only:
      if (!has_frames || has_audio) throw ArgumentError("visual_only sample needs frames only");
      break;
    case ModalityKind::audio_only:
      if (has_frames || !has_audio) throw ArgumentError("audio_only sample needs audio only");
      break;
    case ModalityKind::audio_visual:
      if (!has_frames || !has_audio) throw ArgumentError("audio_visual sample needs frames and audio");
      break;
  }
  if (instruction.empty()) throw ArgumentError(kind_name + " sample has no instruction");
}

}  // namespace wave
