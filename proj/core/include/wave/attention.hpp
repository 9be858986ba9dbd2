#pragma once

#include <cstddef>
#include <span>

#include "wave/tensor.hpp"

namespace wave {

/// A contiguous run of rows of a packed batch that forms one sequence.
struct Segment {
  std::size_t begin = 0;
  std::size_t length = 0;
};

/// Scaled dot-product causal self-attention over packed sequences.
///
/// q, k, v are [T×(n_heads·head_dim)]; each segment attends only within itself
/// and only to earlier-or-equal positions. Rows outside every segment are zero.
Tensor causal_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                        std::span<const Segment> segments, std::size_t n_heads);

}  // namespace wave
