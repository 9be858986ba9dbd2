#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "wave/model_config.hpp"
#include "wave/sample.hpp"
#include "wave/tensor.hpp"

namespace wave {

struct PositionId {
  std::int64_t temporal = 0;
  std::int64_t height = 0;
  std::int64_t width = 0;
  bool operator==(const PositionId&) const = default;
};

/// Time-aligned multimodal positions, one triple per token.
struct PositionGrid {
  std::vector<PositionId> ids;
  // Position the next appended text token would receive.
  std::int64_t next_text_position = 0;

  std::size_t size() const { return ids.size(); }
};

enum class TokenOrigin { text, visual, speech, audio };

/// Where each token of the encoded sequence comes from: which input stream and
/// which row (token index or frame index) of it.
struct TokenSlot {
  TokenOrigin origin;
  std::size_t row;
  bool operator==(const TokenSlot&) const = default;
};

struct TokenLayout {
  std::vector<TokenSlot> slots;
  PositionGrid grid;
};

/// Lays out a sample's tokens and assigns positions.
///
/// The multimodal block comes first, frame by frame: for frame i the visual
/// token, then the speech token, then the audio token, all with temporal id i
/// and height/width 0. Instruction tokens, then text tokens, follow with
/// sequential ids on all three axes starting one past the block's largest id.
/// Throws AlignmentError if the speech and audio streams differ in length.
TokenLayout layout_tokens(const MultimodalSample& sample);

/// Precomputed cos/sin angles for a packed sequence of position triples.
class RotaryTable {
 public:
  RotaryTable(std::span<const PositionId> positions, std::size_t rotary_dim, double base);

  std::size_t tokens() const { return tokens_; }
  std::size_t rotary_dim() const { return rotary_dim_; }
  std::size_t pairs() const { return rotary_dim_ / 2; }
  // Angle cos/sin for (token, pair), pair indices run axis-major.
  double cos(std::size_t token, std::size_t pair) const { return cos_[token * pairs() + pair]; }
  double sin(std::size_t token, std::size_t pair) const { return sin_[token * pairs() + pair]; }

 private:
  std::size_t tokens_;
  std::size_t rotary_dim_;
  std::vector<double> cos_;
  std::vector<double> sin_;
};

/// Rotates the first rotary_dim dimensions of every head of x [T×(n_heads·head_dim)].
/// Those dimensions are split into three equal contiguous blocks (temporal,
/// height, width); each block rotates adjacent pairs by its axis's position.
Tensor apply_rotary(const Tensor& x, std::shared_ptr<const RotaryTable> table,
                    std::size_t n_heads);

/// Convenience wrapper building the table from a grid and a model config.
Tensor apply_tmrope(const Tensor& x, const PositionGrid& grid, const ModelConfig& config);

}  // namespace wave
