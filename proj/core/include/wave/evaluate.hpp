#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "wave/dataset.hpp"
#include "wave/model.hpp"

namespace wave {

/// A query-to-target retrieval setting over one eval group. The pool is every
/// candidate-side sample of the group's eval split.
struct RetrievalDirection {
  std::string name;
  std::string source;            // data group
  bool query_is_target = false;  // query with the record's target, retrieve its source
  bool strip_audio = false;      // drop both audio streams from the audio-visual side
};

/// text_to_visual, visual_to_text, visual_to_audio, audio_to_visual,
/// audio_to_text, text_to_audio, text_to_audio_visual, text_to_visual_stripped.
const std::vector<RetrievalDirection>& standard_directions();
const RetrievalDirection& direction_by_name(std::string_view name);

struct RetrievalMetrics {
  std::string direction;
  std::size_t pool_size = 0;
  std::size_t queries = 0;
  std::size_t hits_at_1 = 0;
  double r1 = 0.0;
  double r5 = 0.0;
  double r10 = 0.0;
  bool operator==(const RetrievalMetrics&) const = default;
};

enum class QaPromptMode { per_question, common_prompt };
std::string_view to_string(QaPromptMode mode);
QaPromptMode parse_qa_prompt_mode(std::string_view name);

struct QaMetrics {
  QaPromptMode mode = QaPromptMode::per_question;
  std::size_t records = 0;
  std::size_t candidates = 0;  // per record, n + 1
  std::size_t correct = 0;
  double accuracy = 0.0;
  bool operator==(const QaMetrics&) const = default;
};

struct EvalReport {
  std::uint64_t seed = 0;
  std::string config_digest;
  double learning_rate = 0.0;
  double reference_learning_rate = 0.0;
  std::vector<RetrievalMetrics> retrieval;
  std::vector<QaMetrics> qa;

  nlohmann::json to_json() const;
  std::string to_csv() const;
  void write(const std::filesystem::path& json_path, const std::filesystem::path& csv_path) const;
};

/// Embeddings of many samples, computed without a tape in chunks.
Tensor embed_all(const WaveModel& model, std::span<const MultimodalSample* const> samples,
                 std::optional<FusionStrategy> strategy = std::nullopt, std::size_t chunk = 32);

/// Pairwise cosine similarities. Every entry comes from the same fixed-order
/// loop, so identical rows score identically and ties stay exact.
Tensor cosine_scores(const Tensor& queries, const Tensor& targets);

/// 0-based rank of the positive target i for every query row i of a square
/// score matrix. Ties are broken by ascending target index.
std::vector<std::size_t> positive_ranks(const Tensor& scores);

/// R@1/5/10 of paired embeddings: query i matches target i. Throws
/// ArgumentError for an empty pool.
RetrievalMetrics retrieval_metrics(const std::string& name, const Tensor& queries, const Tensor& targets);

RetrievalMetrics evaluate_retrieval(const WaveModel& model, const Dataset& dataset,
                                    const RetrievalDirection& direction,
                                    std::optional<FusionStrategy> strategy = std::nullopt);

/// Candidate with the highest cosine similarity; lowest index on ties.
std::size_t predict_choice(std::span<const double> query, const Tensor& candidates);

/// Multiple-choice accuracy over the eval QA records, the clip embedded with
/// either its own question or the fixed describe-the-video prompt.
QaMetrics evaluate_qa(const WaveModel& model, const Dataset& dataset, QaPromptMode mode);

/// P(X >= k) for X ~ Binomial(n, p).
double binomial_upper_tail(std::size_t k, std::size_t n, double p);
/// Central interval [lo, hi] of success counts holding at least `confidence` mass.
std::pair<std::size_t, std::size_t> binomial_interval(std::size_t n, double p, double confidence);

}  // namespace wave
