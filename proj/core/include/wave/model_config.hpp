#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>

namespace wave {

/// How a non-text sample's embedding is read out of the layer stack.
enum class FusionStrategy {
  first_layer,   // last token of layer 0
  middle_layer,  // last token of layer floor(L/2)
  last_layer,    // last token of layer L-1
  weighted_sum,  // softmax-weighted sum of every layer's last token
  mlp_fusion,    // all last tokens concatenated through a two-layer GELU MLP
};

inline constexpr std::array<FusionStrategy, 5> kAllFusionStrategies = {
    FusionStrategy::first_layer, FusionStrategy::middle_layer, FusionStrategy::last_layer,
    FusionStrategy::weighted_sum, FusionStrategy::mlp_fusion};

std::string_view to_string(FusionStrategy strategy);
FusionStrategy parse_fusion_strategy(std::string_view name);

/// Number of rotary position axes: temporal, height, width.
inline constexpr std::size_t kPositionAxes = 3;

struct ModelConfig {
  std::size_t d_model = 64;
  std::size_t n_layers = 6;
  std::size_t n_heads = 4;
  std::size_t d_embed = 32;
  // Hidden width of the per-block MLP.
  std::size_t d_ff = 128;
  // Hidden width of the fusion MLP; 0 means d_model.
  std::size_t fusion_hidden = 0;
  FusionStrategy fusion_strategy = FusionStrategy::mlp_fusion;
  std::size_t max_seq_len = 64;
  // Frame cap per sample (stands in for the 128-frame sampling cap at full scale).
  std::size_t max_frames = 8;
  std::size_t vocab_size = 96;
  std::size_t frame_dim = 32;
  std::size_t speech_dim = 32;
  std::size_t audio_dim = 32;
  double rope_base = 10000.0;

  std::size_t head_dim() const { return d_model / n_heads; }
  // Largest multiple of 2*kPositionAxes that fits in a head; the remaining
  // head dimensions are passed through unrotated.
  std::size_t rotary_dim() const { return head_dim() - head_dim() % (2 * kPositionAxes); }
  std::size_t middle_layer() const { return n_layers / 2; }
  std::size_t layer_index(FusionStrategy strategy) const;
  std::size_t fusion_hidden_width() const { return fusion_hidden ? fusion_hidden : d_model; }
  std::size_t fusion_input_width() const { return n_layers * d_model; }

  /// Throws ValidationError describing every violated constraint.
  void validate() const;
};

struct LoraConfig {
  std::size_t rank = 4;
  double alpha = 2.0;
  double dropout = 0.05;
  // Off by default: with no pretrained backbone, freezing the random base
  // leaves too little capacity for prompt conditioning.
  bool enabled = false;

  // Published full-scale values, kept for reference in reports.
  static constexpr std::size_t kReferenceRank = 128;
  static constexpr double kReferenceAlpha = 2.0;
  static constexpr double kReferenceDropout = 0.05;

  double scaling() const { return alpha / static_cast<double>(rank); }
  void validate() const;
};

}  // namespace wave
