#include "wave/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "wave/errors.hpp"
#include "wave/latent.hpp"
#include "wave/objectives.hpp"

namespace wave {

const std::vector<RetrievalDirection>& standard_directions() {
  static const std::vector<RetrievalDirection> dirs = {
      {"text_to_visual", kSourceVideoTextVisual, true, false},
      {"visual_to_text", kSourceVideoTextVisual, false, false},
      {"visual_to_audio", kSourceVideoAudio, true, false},
      {"audio_to_visual", kSourceVideoAudio, false, false},
      {"audio_to_text", kSourceAudioText, false, false},
      {"text_to_audio", kSourceAudioText, true, false},
      {"text_to_audio_visual", kSourceVideoTextAv, true, false},
      {"text_to_visual_stripped", kSourceVideoTextAv, true, true},
  };
  return dirs;
}

const RetrievalDirection& direction_by_name(std::string_view name) {
  for (const auto& d : standard_directions()) {
    if (d.name == name) return d;
  }
  throw ArgumentError("unknown retrieval direction '" + std::string(name) + "'");
}

std::string_view to_string(QaPromptMode mode) {
  return mode == QaPromptMode::per_question ? "per_question" : "common_prompt";
}

QaPromptMode parse_qa_prompt_mode(std::string_view name) {
  if (name == "per_question") return QaPromptMode::per_question;
  if (name == "common_prompt") return QaPromptMode::common_prompt;
  throw ArgumentError("unknown qa prompt mode '" + std::string(name) + "'");
}

Tensor embed_all(const WaveModel& model, std::span<const MultimodalSample* const> samples,
                 std::optional<FusionStrategy> strategy, std::size_t chunk) {
  NoGradGuard guard;
  const std::size_t d = model.config().d_embed;
  std::vector<double> out;
  out.reserve(samples.size() * d);
  chunk = std::max<std::size_t>(chunk, 1);
  for (std::size_t b = 0; b < samples.size(); b += chunk) {
    const auto part = samples.subspan(b, std::min(chunk, samples.size() - b));
    const LayerStates states = model.forward_batch(part);
    const Tensor e = strategy ? model.extract_embedding(states, *strategy) : model.extract_embedding(states);
    out.insert(out.end(), e.data().begin(), e.data().end());
  }
  return Tensor({samples.size(), d}, std::move(out));
}

std::vector<std::size_t> positive_ranks(const Tensor& scores) {
  const std::size_t q = scores.rows();
  const std::size_t t = scores.cols();
  if (q != t) throw DimensionError("score matrix must be square, got " + shape_to_string(scores.shape()));
  std::vector<std::size_t> ranks(q);
  std::vector<std::size_t> order(t);
  for (std::size_t i = 0; i < q; ++i) {
    const auto row = scores.data().subspan(i * t, t);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return row[a] > row[b]; });
    ranks[i] = static_cast<std::size_t>(std::find(order.begin(), order.end(), i) - order.begin());
  }
  return ranks;
}

Tensor cosine_scores(const Tensor& queries, const Tensor& targets) {
  const std::size_t d = queries.cols();
  if (targets.cols() != d) {
    throw DimensionError("score inputs differ in width: " + shape_to_string(queries.shape()) + " vs " +
                         shape_to_string(targets.shape()));
  }
  auto norms = [d](const Tensor& x) {
    std::vector<double> n(x.rows());
    for (std::size_t r = 0; r < n.size(); ++r) {
      double ss = 0.0;
      for (std::size_t j = 0; j < d; ++j) ss += x.at(r, j) * x.at(r, j);
      n[r] = std::sqrt(ss);
    }
    return n;
  };
  const auto qn = norms(queries), tn = norms(targets);
  std::vector<double> out(queries.rows() * targets.rows());
  for (std::size_t i = 0; i < queries.rows(); ++i) {
    const auto q = queries.data().subspan(i * d, d);
    for (std::size_t k = 0; k < targets.rows(); ++k) {
      const auto t = targets.data().subspan(k * d, d);
      double dot = 0.0;
      for (std::size_t j = 0; j < d; ++j) dot += q[j] * t[j];
      out[i * targets.rows() + k] = dot / (qn[i] * tn[k]);
    }
  }
  return Tensor({queries.rows(), targets.rows()}, std::move(out));
}

RetrievalMetrics retrieval_metrics(const std::string& name, const Tensor& queries, const Tensor& targets) {
  if (queries.numel() == 0 || targets.numel() == 0) throw ArgumentError("retrieval pool is empty");
  if (queries.rows() != targets.rows()) {
    throw DimensionError("query and target counts differ: " + shape_to_string(queries.shape()) + " vs " +
                         shape_to_string(targets.shape()));
  }
  const auto ranks = positive_ranks(cosine_scores(queries, targets));
  RetrievalMetrics m;
  m.direction = name;
  m.pool_size = targets.rows();
  m.queries = queries.rows();
  std::size_t h5 = 0, h10 = 0;
  for (std::size_t r : ranks) {
    m.hits_at_1 += r < 1;
    h5 += r < 5;
    h10 += r < 10;
  }
  const double n = static_cast<double>(ranks.size());
  m.r1 = static_cast<double>(m.hits_at_1) / n;
  m.r5 = static_cast<double>(h5) / n;
  m.r10 = static_cast<double>(h10) / n;
  return m;
}

namespace {

MultimodalSample strip_audio(const MultimodalSample& s) {
  MultimodalSample out = s;
  out.speech = {};
  out.audio = {};
  if (out.kind == ModalityKind::audio_visual) out.kind = ModalityKind::visual_only;
  return out;
}

}  // namespace

RetrievalMetrics evaluate_retrieval(const WaveModel& model, const Dataset& dataset,
                                    const RetrievalDirection& direction, std::optional<FusionStrategy> strategy) {
  const auto records = dataset.select(Split::eval, direction.source);
  if (records.empty()) throw ArgumentError("no eval records for source '" + direction.source + "'");
  std::vector<MultimodalSample> stripped;
  if (direction.strip_audio) {
    stripped.reserve(records.size());
    for (const Record* r : records) stripped.push_back(strip_audio(r->source));
  }
  std::vector<const MultimodalSample*> queries, targets;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const MultimodalSample* src = direction.strip_audio ? &stripped[i] : &records[i]->source;
    const MultimodalSample* tgt = &records[i]->target;
    queries.push_back(direction.query_is_target ? tgt : src);
    targets.push_back(direction.query_is_target ? src : tgt);
  }
  return retrieval_metrics(direction.name, embed_all(model, queries, strategy), embed_all(model, targets, strategy));
}

std::size_t predict_choice(std::span<const double> query, const Tensor& candidates) {
  const std::size_t d = candidates.cols();
  if (query.size() != d) throw DimensionError("query width does not match candidates");
  double qn = 0.0;
  for (double v : query) qn += v * v;
  qn = std::sqrt(qn);
  std::size_t best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < candidates.rows(); ++c) {
    const auto row = candidates.data().subspan(c * d, d);
    double dot = 0.0, cn = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      dot += query[j] * row[j];
      cn += row[j] * row[j];
    }
    const double score = dot / (qn * std::sqrt(cn));
    if (score > best_score) {
      best_score = score;
      best = c;
    }
  }
  return best;
}

QaMetrics evaluate_qa(const WaveModel& model, const Dataset& dataset, QaPromptMode mode) {
  const auto records = dataset.select(Split::eval, kSourceVideoQa);
  QaMetrics m;
  m.mode = mode;
  m.records = records.size();
  if (records.empty()) return m;
  m.candidates = records[0]->distractors.size() + 1;

  const Vocabulary vocab(dataset.header.latent.num_classes, dataset.header.latent.attribute_values);
  std::vector<MultimodalSample> prompted;
  prompted.reserve(records.size());
  for (const Record* r : records) {
    prompted.push_back(r->source);
    if (mode == QaPromptMode::common_prompt) prompted.back().instruction = vocab.describe_video_prompt();
  }
  std::vector<const MultimodalSample*> sources, candidates;
  for (const auto& s : prompted) sources.push_back(&s);
  for (const Record* r : records) {
    const auto c = r->candidates();
    if (c.size() != m.candidates) throw ValidationError("qa records differ in candidate count");
    candidates.insert(candidates.end(), c.begin(), c.end());
  }
  const Tensor src = embed_all(model, sources);
  const Tensor cand = embed_all(model, candidates);
  const std::size_t d = src.cols();
  for (std::size_t i = 0; i < records.size(); ++i) {
    const Tensor options = slice(cand, 0, i * m.candidates, (i + 1) * m.candidates);
    m.correct += predict_choice(src.data().subspan(i * d, d), options) == records[i]->answer_index;
  }
  m.accuracy = static_cast<double>(m.correct) / static_cast<double>(m.records);
  return m;
}

namespace {

double log_binomial_pmf(std::size_t k, std::size_t n, double p) {
  const double kk = static_cast<double>(k), nn = static_cast<double>(n);
  double log_p = 0.0;
  if (k > 0) log_p += kk * std::log(p);
  if (k < n) log_p += (nn - kk) * std::log1p(-p);
  return std::lgamma(nn + 1) - std::lgamma(kk + 1) - std::lgamma(nn - kk + 1) + log_p;
}

}  // namespace

double binomial_upper_tail(std::size_t k, std::size_t n, double p) {
  if (k == 0) return 1.0;
  if (k > n) return 0.0;
  if (p <= 0.0) return 0.0;
  if (p >= 1.0) return 1.0;
  double total = 0.0;
  for (std::size_t j = k; j <= n; ++j) total += std::exp(log_binomial_pmf(j, n, p));
  return std::min(total, 1.0);
}

std::pair<std::size_t, std::size_t> binomial_interval(std::size_t n, double p, double confidence) {
  const double alpha = (1.0 - confidence) / 2.0;
  std::size_t lo = 0;
  double cdf = 0.0;
  // Largest lo with P(X < lo) <= alpha.
  while (lo < n) {
    const double next = cdf + std::exp(log_binomial_pmf(lo, n, p));
    if (next > alpha) break;
    cdf = next;
    ++lo;
  }
  // Smallest hi with P(X > hi) <= alpha.
  std::size_t hi = n;
  double tail = 0.0;
  while (hi > lo) {
    const double next = tail + std::exp(log_binomial_pmf(hi, n, p));
    if (next > alpha) break;
    tail = next;
    --hi;
  }
  return {lo, hi};
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json j{{"seed", seed},
                   {"config_digest", config_digest},
                   {"learning_rate", learning_rate},
                   {"reference_learning_rate", reference_learning_rate}};
  j["retrieval"] = nlohmann::json::array();
  for (const auto& m : retrieval) {
    j["retrieval"].push_back({{"direction", m.direction},
                              {"pool_size", m.pool_size},
                              {"queries", m.queries},
                              {"chance_r1", 1.0 / static_cast<double>(m.pool_size)},
                              {"r1", m.r1},
                              {"r5", m.r5},
                              {"r10", m.r10}});
  }
  j["qa"] = nlohmann::json::array();
  for (const auto& m : qa) {
    j["qa"].push_back({{"mode", to_string(m.mode)},
                       {"records", m.records},
                       {"candidates", m.candidates},
                       {"chance", m.candidates ? 1.0 / static_cast<double>(m.candidates) : 0.0},
                       {"accuracy", m.accuracy}});
  }
  return j;
}

std::string EvalReport::to_csv() const {
  std::ostringstream os;
  os.precision(17);
  os << "task,setting,pool_size,queries,metric,value\n";
  for (const auto& m : retrieval) {
    os << "retrieval," << m.direction << ',' << m.pool_size << ',' << m.queries << ",r1," << m.r1 << '\n';
    os << "retrieval," << m.direction << ',' << m.pool_size << ',' << m.queries << ",r5," << m.r5 << '\n';
    os << "retrieval," << m.direction << ',' << m.pool_size << ',' << m.queries << ",r10," << m.r10 << '\n';
  }
  for (const auto& m : qa) {
    os << "qa," << to_string(m.mode) << ',' << m.candidates << ',' << m.records << ",accuracy," << m.accuracy
       << '\n';
  }
  return os.str();
}

void EvalReport::write(const std::filesystem::path& json_path, const std::filesystem::path& csv_path) const {
  std::ofstream js(json_path);
  if (!js) throw IoError("cannot open '" + json_path.string() + "' for writing");
  js << to_json().dump(2) << '\n';
  std::ofstream cs(csv_path);
  if (!cs) throw IoError("cannot open '" + csv_path.string() + "' for writing");
  cs << to_csv();
  if (!js || !cs) throw IoError("failed writing eval report");
}

}  // namespace wave
