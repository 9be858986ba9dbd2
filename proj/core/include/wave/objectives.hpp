#pragma once

#include <cstddef>
#include <span>

#include "wave/tensor.hpp"

namespace wave {

struct ObjectiveConfig {
  // Fixed (not learned) softmax temperature.
  double temperature = 0.01;
  std::size_t batch_size = 16;  // N
  std::size_t distractors = 3;  // n, four-way multiple choice

  static constexpr double kReferenceTemperature = 0.01;

  void validate() const;
};

/// Source/target (and optional distractor) embeddings of one mini-batch.
struct EmbeddingBatch {
  Tensor source;       // [N × d]
  Tensor target;       // [N × d]
  Tensor distractors;  // [N × n × d], undefined for retrieval batches

  std::size_t size() const { return source.defined() ? source.dim(0) : 0; }
  bool has_distractors() const { return distractors.defined(); }
};

/// Cosine similarity of two vectors (any shape, compared as flat vectors).
/// Throws DegenerateInputError on a zero-norm input.
Tensor cosine_sim(const Tensor& a, const Tensor& b);

/// [N × M] cosine-similarity matrix between the rows of a and b.
Tensor cosine_matrix(const Tensor& a, const Tensor& b);

/// Symmetric in-batch InfoNCE: the mean over samples of the source→target and
/// target→source cross-entropies of cos/τ, every non-matching pair in the
/// batch acting as a negative.
Tensor retrieval_loss(const EmbeddingBatch& batch, const ObjectiveConfig& cfg);

/// Multiple-choice loss: per sample, cross-entropy of [cos(s,t), cos(s,t'_1..n)]/τ
/// with the correct answer as target, averaged over the batch. Only the
/// sample's own distractors compete; there is no reverse direction.
Tensor qa_loss(const EmbeddingBatch& batch, const ObjectiveConfig& cfg);

}  // namespace wave
