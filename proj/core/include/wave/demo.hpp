#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "wave/dataset.hpp"
#include "wave/latent.hpp"
#include "wave/model.hpp"

namespace wave {

struct LabeledTokens {
  std::string label;
  std::vector<TokenId> tokens;
};

struct SimilarityMatrix {
  std::vector<std::string> row_labels;
  std::vector<std::string> col_labels;
  std::vector<double> values;  // row-major

  std::size_t rows() const { return row_labels.size(); }
  std::size_t cols() const { return col_labels.size(); }
  double at(std::size_t r, std::size_t c) const { return values.at(r * cols() + c); }
  std::string to_csv() const;
  void write_csv(const std::filesystem::path& path) const;
};

/// Cosine similarities between the sample embedded under each prompt (rows)
/// and each text (columns). Throws ArgumentError for a text-only sample or
/// empty lists.
SimilarityMatrix prompt_aware_demo(const WaveModel& model, const MultimodalSample& sample,
                                   const std::vector<LabeledTokens>& prompts,
                                   const std::vector<LabeledTokens>& texts);

/// general, object, sound, speaker prompts.
std::vector<LabeledTokens> demo_prompts(const Vocabulary& vocab);
/// The full caption, then one answer text per attribute slot of `id`.
std::vector<LabeledTokens> demo_texts(const Vocabulary& vocab, const Identity& id);

struct DemoSummary {
  std::size_t samples = 0;
  // Samples where every attribute prompt's best attribute text is its own slot.
  std::size_t all_slots_matched = 0;
  std::vector<std::size_t> slot_matched;  // per slot
  SimilarityMatrix first;                 // matrix of the first sample

  double sample_accuracy() const { return samples ? double(all_slots_matched) / double(samples) : 0.0; }
};

/// Runs the demo over up to max_samples audio-visual eval clips and checks the
/// argmax pattern: attribute prompt i prefers attribute text i over the other
/// attribute texts (the general caption is excluded from the comparison).
DemoSummary run_prompt_demo(const WaveModel& model, const Dataset& dataset, std::size_t max_samples);

}  // namespace wave
