#include "wave/demo.hpp"

#include <fstream>
#include <sstream>

#include "wave/errors.hpp"
#include "wave/evaluate.hpp"
#include "wave/objectives.hpp"

namespace wave {

std::string SimilarityMatrix::to_csv() const {
  std::ostringstream os;
  os.precision(17);
  os << "prompt";
  for (const auto& c : col_labels) os << ',' << c;
  os << '\n';
  for (std::size_t r = 0; r < rows(); ++r) {
    os << row_labels[r];
    for (std::size_t c = 0; c < cols(); ++c) os << ',' << at(r, c);
    os << '\n';
  }
  return os.str();
}

void SimilarityMatrix::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << to_csv();
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

SimilarityMatrix prompt_aware_demo(const WaveModel& model, const MultimodalSample& sample,
                                   const std::vector<LabeledTokens>& prompts,
                                   const std::vector<LabeledTokens>& texts) {
  if (sample.kind == ModalityKind::text_only) throw ArgumentError("demo sample must carry a non-text modality");
  if (prompts.empty() || texts.empty()) throw ArgumentError("demo needs at least one prompt and one text");
  std::vector<MultimodalSample> views, text_samples;
  for (const auto& p : prompts) {
    views.push_back(sample);
    views.back().instruction = p.tokens;
  }
  for (const auto& t : texts) {
    MultimodalSample s;
    s.kind = ModalityKind::text_only;
    s.text_tokens = t.tokens;
    text_samples.push_back(std::move(s));
  }
  std::vector<const MultimodalSample*> vp, tp;
  for (const auto& v : views) vp.push_back(&v);
  for (const auto& t : text_samples) tp.push_back(&t);
  NoGradGuard guard;
  const Tensor sim = cosine_matrix(embed_all(model, vp), embed_all(model, tp));
  SimilarityMatrix m;
  for (const auto& p : prompts) m.row_labels.push_back(p.label);
  for (const auto& t : texts) m.col_labels.push_back(t.label);
  m.values.assign(sim.data().begin(), sim.data().end());
  return m;
}

std::vector<LabeledTokens> demo_prompts(const Vocabulary& vocab) {
  std::vector<LabeledTokens> out{{"general", vocab.describe_video_prompt()}};
  for (auto slot : kAllSlots) out.push_back({std::string(to_string(slot)), vocab.question_prompt(slot)});
  return out;
}

std::vector<LabeledTokens> demo_texts(const Vocabulary& vocab, const Identity& id) {
  std::vector<LabeledTokens> out{{"caption", vocab.caption(id)}};
  for (auto slot : kAllSlots) {
    out.push_back({std::string(to_string(slot)), vocab.answer(slot, id.attribute(slot))});
  }
  return out;
}

DemoSummary run_prompt_demo(const WaveModel& model, const Dataset& dataset, std::size_t max_samples) {
  const Vocabulary vocab(dataset.header.latent.num_classes, dataset.header.latent.attribute_values);
  const auto prompts = demo_prompts(vocab);
  DemoSummary summary;
  summary.slot_matched.assign(kAttributeSlots, 0);
  for (const Record* r : dataset.select(Split::eval, kSourceVideoTextAv)) {
    if (summary.samples >= max_samples) break;
    const auto m = prompt_aware_demo(model, r->source, prompts, demo_texts(vocab, r->identity));
    if (summary.samples == 0) summary.first = m;
    ++summary.samples;
    bool all = true;
    for (std::size_t s = 0; s < kAttributeSlots; ++s) {
      // Rows and columns 1..3 are the attribute prompts and texts.
      std::size_t best = 1;
      for (std::size_t c = 2; c <= kAttributeSlots; ++c) {
        if (m.at(s + 1, c) > m.at(s + 1, best)) best = c;
      }
      const bool ok = best == s + 1;
      summary.slot_matched[s] += ok;
      all = all && ok;
    }
    summary.all_slots_matched += all;
  }
  return summary;
}

}  // namespace wave
