#include "wave/tmrope.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "wave/errors.hpp"

namespace wave {

TokenLayout layout_tokens(const MultimodalSample& sample) {
  const bool has_speech = !sample.speech.empty();
  const bool has_audio = !sample.audio.empty();
  if (has_speech && has_audio && sample.speech.length() != sample.audio.length()) {
    throw AlignmentError("speech stream has " + std::to_string(sample.speech.length()) +
                         " frames but audio stream has " + std::to_string(sample.audio.length()));
  }
  TokenLayout layout;
  auto& slots = layout.slots;
  auto& ids = layout.grid.ids;

  const std::size_t visual_len = sample.frames.length();
  const std::size_t audio_len = has_speech ? sample.speech.length() : sample.audio.length();
  const std::size_t block = std::max(visual_len, audio_len);
  std::int64_t next = 0;
  for (std::size_t i = 0; i < block; ++i) {
    const PositionId pos{static_cast<std::int64_t>(i), 0, 0};
    if (i < visual_len) {
      slots.push_back({TokenOrigin::visual, i});
      ids.push_back(pos);
    }
    if (has_speech && i < audio_len) {
      slots.push_back({TokenOrigin::speech, i});
      ids.push_back(pos);
    }
    if (has_audio && i < audio_len) {
      slots.push_back({TokenOrigin::audio, i});
      ids.push_back(pos);
    }
    next = static_cast<std::int64_t>(i) + 1;
  }
  std::size_t text_row = 0;
  auto push_text = [&](std::size_t count) {
    for (std::size_t j = 0; j < count; ++j) {
      slots.push_back({TokenOrigin::text, text_row++});
      ids.push_back({next, next, next});
      ++next;
    }
  };
  push_text(sample.instruction.size());
  push_text(sample.text_tokens.size());
  layout.grid.next_text_position = next;
  return layout;
}

RotaryTable::RotaryTable(std::span<const PositionId> positions, std::size_t rotary_dim,
                         double base)
    : tokens_(positions.size()), rotary_dim_(rotary_dim) {
  if (rotary_dim % (2 * kPositionAxes) != 0) {
    throw ArgumentError("rotary dimension " + std::to_string(rotary_dim) +
                        " is not divisible by " + std::to_string(2 * kPositionAxes));
  }
  const std::size_t per_axis = rotary_dim / (2 * kPositionAxes);
  std::vector<double> inv_freq(per_axis);
  for (std::size_t j = 0; j < per_axis; ++j) {
    inv_freq[j] = std::pow(base, -static_cast<double>(j) / static_cast<double>(per_axis));
  }
  cos_.resize(tokens_ * pairs());
  sin_.resize(tokens_ * pairs());
  for (std::size_t t = 0; t < tokens_; ++t) {
    const std::int64_t axis_pos[kPositionAxes] = {positions[t].temporal, positions[t].height,
                                                  positions[t].width};
    for (std::size_t a = 0; a < kPositionAxes; ++a) {
      for (std::size_t j = 0; j < per_axis; ++j) {
        const double angle = static_cast<double>(axis_pos[a]) * inv_freq[j];
        cos_[t * pairs() + a * per_axis + j] = std::cos(angle);
        sin_[t * pairs() + a * per_axis + j] = std::sin(angle);
      }
    }
  }
}

namespace {

// Rotates in place; sign = -1 applies the inverse rotation.
void rotate_rows(double* x, std::size_t width, const RotaryTable& table, std::size_t n_heads,
                 double sign) {
  const std::size_t head_dim = width / n_heads;
  const std::size_t pairs = table.pairs();
  for (std::size_t t = 0; t < table.tokens(); ++t) {
    double* row = x + t * width;
    for (std::size_t h = 0; h < n_heads; ++h) {
      double* head = row + h * head_dim;
      for (std::size_t p = 0; p < pairs; ++p) {
        const double c = table.cos(t, p);
        const double s = sign * table.sin(t, p);
        const double x0 = head[2 * p];
        const double x1 = head[2 * p + 1];
        head[2 * p] = x0 * c - x1 * s;
        head[2 * p + 1] = x0 * s + x1 * c;
      }
    }
  }
}

}  // namespace

Tensor apply_rotary(const Tensor& x, std::shared_ptr<const RotaryTable> shared,
                    std::size_t n_heads) {
  const RotaryTable& table = *shared;
  if (x.rank() != 2 || x.dim(0) != table.tokens() || n_heads == 0 || x.dim(1) % n_heads != 0 ||
      x.dim(1) / n_heads < table.rotary_dim()) {
    throw DimensionError("apply_rotary: input " + shape_to_string(x.shape()) + " incompatible with " +
                         std::to_string(table.tokens()) + " positions, " +
                         std::to_string(n_heads) + " heads, rotary dim " +
                         std::to_string(table.rotary_dim()));
  }
  const std::size_t width = x.dim(1);
  std::vector<double> out(x.data().begin(), x.data().end());
  rotate_rows(out.data(), width, table, n_heads, 1.0);
  return Tensor::from_op(x.shape(), std::move(out), {x}, "tmrope",
                         [shared, n_heads, width](const TensorImpl& y) {
                           TensorImpl* p = y.node->parents[0].impl();
                           if (!p->requires_grad) return;
                           std::vector<double> g(y.grad);
                           rotate_rows(g.data(), width, *shared, n_heads, -1.0);
                           auto pg = p->grad_buffer();
                           for (std::size_t i = 0; i < g.size(); ++i) pg[i] += g[i];
                         });
}

Tensor apply_tmrope(const Tensor& x, const PositionGrid& grid, const ModelConfig& config) {
  return apply_rotary(
      x, std::make_shared<const RotaryTable>(grid.ids, config.rotary_dim(), config.rope_base),
      config.n_heads);
}

}  // namespace wave
