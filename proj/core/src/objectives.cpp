#include "wave/objectives.hpp"

#include <numeric>
#include <string>
#include <vector>

#include "wave/errors.hpp"

namespace wave {

void ObjectiveConfig::validate() const {
  std::string errors;
  auto fail = [&](const std::string& msg) { errors += (errors.empty() ? "" : "; ") + msg; };
  if (!(temperature > 0.0)) fail("objective.temperature must be positive");
  if (batch_size < 1) fail("objective.batch_size must be >= 1");
  if (distractors < 1) fail("objective.distractors must be >= 1");
  if (!errors.empty()) throw ValidationError(errors);
}

namespace {

Tensor as_row(const Tensor& t) { return t.rank() == 2 && t.dim(0) == 1 ? t : reshape(t, {1, t.numel()}); }

Tensor normalized(const Tensor& t, const char* what) {
  try {
    return normalize_rows(t);
  } catch (const DegenerateInputError&) {
    throw DegenerateInputError(std::string(what) + " contains a zero-norm embedding");
  }
}

void check_pair(const EmbeddingBatch& batch) {
  if (!batch.source.defined() || !batch.target.defined() || batch.size() == 0) {
    throw EmptyBatchError("embedding batch is empty");
  }
  if (batch.source.rank() != 2 || batch.source.shape() != batch.target.shape()) {
    throw DimensionError("source " + shape_to_string(batch.source.shape()) + " and target " +
                         shape_to_string(batch.target.shape()) + " must be matching matrices");
  }
}

}  // namespace

Tensor cosine_sim(const Tensor& a, const Tensor& b) {
  if (a.numel() != b.numel()) {
    throw DimensionError("cosine_sim: " + shape_to_string(a.shape()) + " vs " +
                         shape_to_string(b.shape()));
  }
  const Tensor an = normalized(as_row(a), "cosine_sim input");
  const Tensor bn = normalized(as_row(b), "cosine_sim input");
  return sum(mul(an, bn));
}

Tensor cosine_matrix(const Tensor& a, const Tensor& b) {
  return matmul(normalized(a, "similarity input"), transpose(normalized(b, "similarity input")));
}

Tensor retrieval_loss(const EmbeddingBatch& batch, const ObjectiveConfig& cfg) {
  check_pair(batch);
  if (batch.has_distractors()) throw ArgumentError("retrieval_loss: batch carries distractors");
  const std::size_t n = batch.size();
  const Tensor logits = scale(cosine_matrix(batch.source, batch.target), 1.0 / cfg.temperature);
  std::vector<std::size_t> diag(n);
  std::iota(diag.begin(), diag.end(), 0);
  const Tensor source_to_target = softmax_cross_entropy(logits, diag);
  const Tensor target_to_source = softmax_cross_entropy(transpose(logits), diag);
  return scale(add(source_to_target, target_to_source), 0.5);
}

Tensor qa_loss(const EmbeddingBatch& batch, const ObjectiveConfig& cfg) {
  check_pair(batch);
  if (!batch.has_distractors()) throw ArgumentError("qa_loss: batch has no distractors");
  const std::size_t n = batch.size(), d = batch.source.dim(1);
  const Shape& ds = batch.distractors.shape();
  if (ds.size() != 3 || ds[0] != n || ds[2] != d || ds[1] < 1) {
    throw DimensionError("qa_loss: distractors " + shape_to_string(ds) + " do not match [" +
                         std::to_string(n) + "×n×" + std::to_string(d) + "]");
  }
  const std::size_t k = ds[1];
  const Tensor src = normalized(batch.source, "QA source");
  const Tensor tgt = normalized(batch.target, "QA target");
  const Tensor dis = normalized(reshape(batch.distractors, {n * k, d}), "QA distractors");
  std::vector<Tensor> rows;
  rows.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Tensor candidates =
        concat({slice(tgt, 0, i, i + 1), slice(dis, 0, i * k, (i + 1) * k)}, 0);
    rows.push_back(matmul(slice(src, 0, i, i + 1), transpose(candidates)));
  }
  const Tensor logits = scale(n == 1 ? rows.front() : concat(rows, 0), 1.0 / cfg.temperature);
  const std::vector<std::size_t> correct(n, 0);
  return softmax_cross_entropy(logits, correct);
}

}  // namespace wave
