#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "wave/sample.hpp"

namespace wave {

enum class AttributeSlot : std::size_t { object = 0, sound = 1, speaker = 2 };
inline constexpr std::size_t kAttributeSlots = 3;
inline constexpr std::array<AttributeSlot, kAttributeSlots> kAllSlots = {
    AttributeSlot::object, AttributeSlot::sound, AttributeSlot::speaker};

std::string_view to_string(AttributeSlot slot);
AttributeSlot parse_attribute_slot(std::string_view name);

/// Semantic content of one synthetic clip: a scene class plus one value per
/// attribute slot.
struct Identity {
  std::size_t class_id = 0;
  std::array<std::size_t, kAttributeSlots> attributes{};

  std::size_t attribute(AttributeSlot slot) const {
    return attributes[static_cast<std::size_t>(slot)];
  }
  bool operator==(const Identity&) const = default;
};

enum class Stream { visual, speech, audio };

/// How strongly each stream renders the latent blocks [class, object, sound, speaker].
/// Every stream sees the class; frames carry sound and speaker only weakly,
/// the speech stream carries no object or sound, the audio-event stream no speaker.
inline constexpr double kStreamGains[3][4] = {
    {1.0, 1.0, 0.5, 0.5},  // visual
    {0.5, 0.0, 0.0, 1.0},  // speech
    {1.0, 0.5, 1.0, 0.0},  // audio events
};

struct LatentParams {
  std::size_t num_classes = 32;
  std::size_t attribute_values = 8;  // per slot
  std::size_t latent_dim = 8;        // per block
  std::size_t frame_dim = 32;
  std::size_t speech_dim = 32;
  std::size_t audio_dim = 32;
  double noise = 0.1;  // per-feature Gaussian noise σ
  std::size_t min_frames = 2;
  std::size_t max_frames = 8;
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const LatentParams&) const = default;
};

/// Materialised latent world: class/attribute latents and per-stream rendering
/// matrices, all drawn deterministically from params.seed.
class LatentSpec {
 public:
  /// Draws latents by rejection until every pair within a block is more than
  /// 4σ apart.
  static LatentSpec generate(const LatentParams& params);

  const LatentParams& params() const { return params_; }
  std::size_t identity_dim() const { return 4 * params_.latent_dim; }
  std::size_t feature_dim(Stream stream) const;

  std::span<const double> class_latent(std::size_t c) const;
  std::span<const double> attribute_latent(AttributeSlot slot, std::size_t value) const;
  /// Concatenated [class | object | sound | speaker] latent.
  std::vector<double> identity_latent(const Identity& id) const;
  /// [feature_dim × identity_dim] row-major rendering matrix of a stream.
  std::span<const double> render_matrix(Stream stream) const;
  /// Noise-free feature vector of a stream for an identity.
  std::vector<double> render_mean(Stream stream, const Identity& id) const;
  FeatureSequence render(Stream stream, const Identity& id, std::size_t frames,
                         std::mt19937_64& rng) const;

  double min_class_distance() const;
  double min_attribute_distance() const;
  /// SHA-256 over the parameters and every generated value.
  std::string digest() const;

 private:
  LatentParams params_;
  std::vector<double> class_latents_;                        // C × k
  std::array<std::vector<double>, kAttributeSlots> attrs_;   // A × k each
  std::array<std::vector<double>, 3> render_;                // per stream
};

/// Token ids of the synthetic language. Layout: specials, then class tokens,
/// then object, sound and speaker value tokens.
class Vocabulary {
 public:
  static constexpr TokenId kPad = 0;
  static constexpr TokenId kEos = 1;
  static constexpr TokenId kDescribeVideo = 2;
  static constexpr TokenId kDescribeAudio = 3;
  static constexpr TokenId kAskObject = 4;
  static constexpr TokenId kAskSound = 5;
  static constexpr TokenId kAskSpeaker = 6;
  static constexpr TokenId kFirstContent = 8;

  Vocabulary(std::size_t num_classes, std::size_t attribute_values)
      : classes_(num_classes), values_(attribute_values) {}

  std::size_t size() const { return kFirstContent + classes_ + kAttributeSlots * values_; }
  TokenId class_token(std::size_t c) const;
  TokenId attribute_token(AttributeSlot slot, std::size_t value) const;
  TokenId question_token(AttributeSlot slot) const;

  /// Full description: class, object, sound, speaker, EOS.
  std::vector<TokenId> caption(const Identity& id) const;
  /// Short answer naming one attribute value.
  std::vector<TokenId> answer(AttributeSlot slot, std::size_t value) const;
  std::vector<TokenId> describe_video_prompt() const { return {kDescribeVideo, kEos}; }
  std::vector<TokenId> describe_audio_prompt() const { return {kDescribeAudio, kEos}; }
  std::vector<TokenId> question_prompt(AttributeSlot slot) const { return {question_token(slot), kEos}; }

 private:
  std::size_t classes_;
  std::size_t values_;
};

}  // namespace wave
