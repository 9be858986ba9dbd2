#include "wave/model.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>

#include "wave/errors.hpp"

namespace wave {

// ---- configs ----------------------------------------------------------------

std::string_view to_string(FusionStrategy strategy) {
  switch (strategy) {
    case FusionStrategy::first_layer:
      return "first_layer";
    case FusionStrategy::middle_layer:
      return "middle_layer";
    case FusionStrategy::last_layer:
      return "last_layer";
    case FusionStrategy::weighted_sum:
      return "weighted_sum";
    case FusionStrategy::mlp_fusion:
      return "mlp_fusion";
  }
  return "unknown";
}

FusionStrategy parse_fusion_strategy(std::string_view name) {
  for (auto s : kAllFusionStrategies) {
    if (to_string(s) == name) return s;
  }
  throw ValidationError("unknown fusion strategy '" + std::string(name) + "'");
}

std::size_t ModelConfig::layer_index(FusionStrategy strategy) const {
  switch (strategy) {
    case FusionStrategy::first_layer:
      return 0;
    case FusionStrategy::middle_layer:
      return middle_layer();
    default:
      return n_layers - 1;
  }
}

void ModelConfig::validate() const {
  std::string errors;
  auto fail = [&](const std::string& msg) { errors += (errors.empty() ? "" : "; ") + msg; };
  if (d_model == 0) fail("model.d_model must be positive");
  if (n_layers == 0) fail("model.n_layers must be positive");
  if (n_heads == 0 || (d_model && d_model % n_heads != 0)) {
    fail("model.d_model must be divisible by model.n_heads");
  } else if (rotary_dim() < 2 * kPositionAxes) {
    fail("model head width d_model/n_heads must be at least " + std::to_string(2 * kPositionAxes));
  }
  if (d_embed == 0) fail("model.d_embed must be positive");
  if (d_ff == 0) fail("model.d_ff must be positive");
  if (max_seq_len == 0) fail("model.max_seq_len must be positive");
  if (max_frames == 0) fail("model.max_frames must be positive");
  if (vocab_size == 0) fail("model.vocab_size must be positive");
  if (frame_dim == 0 || speech_dim == 0 || audio_dim == 0) fail("model feature dims must be positive");
  if (!(rope_base > 1.0)) fail("model.rope_base must exceed 1");
  if (!errors.empty()) throw ValidationError(errors);
}

void LoraConfig::validate() const {
  std::string errors;
  auto fail = [&](const std::string& msg) { errors += (errors.empty() ? "" : "; ") + msg; };
  if (enabled && rank < 1) fail("lora.rank must be >= 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) fail("lora.dropout must lie in [0, 1)");
  if (!(alpha > 0.0)) fail("lora.alpha must be positive");
  if (!errors.empty()) throw ValidationError(errors);
}

// ---- layer states -----------------------------------------------------------

std::vector<double> LayerStates::layer_vector(std::size_t layer, std::size_t index) const {
  const Tensor& t = last_tokens.at(layer);
  const auto width = t.cols();
  const auto row = t.data().subspan(index * width, width);
  return {row.begin(), row.end()};
}

// ---- construction -----------------------------------------------------------

namespace {

std::vector<double> normal_values(std::size_t n, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  std::vector<double> v(n);
  for (auto& x : v) x = dist(rng);
  return v;
}

}  // namespace

Tensor WaveModel::add_param(std::string name, Shape shape, std::vector<double> values,
                            bool trainable) {
  Tensor t(std::move(shape), std::move(values), trainable);
  params_.push_back({std::move(name), t, trainable});
  return t;
}

WaveModel::Linear WaveModel::make_linear(const std::string& name, std::size_t in,
                                         std::size_t out, bool bias, bool trainable,
                                         double std_scale, std::mt19937_64& rng) {
  Linear layer;
  const double stddev = std_scale / std::sqrt(static_cast<double>(in));
  layer.weight = add_param(name + ".weight", {in, out}, normal_values(in * out, stddev, rng),
                           trainable);
  if (bias) layer.bias = add_param(name + ".bias", {out}, std::vector<double>(out, 0.0), trainable);
  return layer;
}

void WaveModel::add_adapter(const std::string& name, Linear& layer, std::mt19937_64& rng) {
  const auto in = layer.weight.dim(0), out = layer.weight.dim(1);
  const double stddev = 1.0 / std::sqrt(static_cast<double>(in));
  layer.lora_a = add_param(name + ".lora_a", {in, lora_.rank},
                           normal_values(in * lora_.rank, stddev, rng), true);
  layer.lora_b = add_param(name + ".lora_b", {lora_.rank, out},
                           std::vector<double>(lora_.rank * out, 0.0), true);
}

WaveModel::WaveModel(ModelConfig config, LoraConfig lora, std::uint64_t seed)
    : config_(std::move(config)), lora_(lora) {
  config_.validate();
  lora_.validate();
  const std::size_t d = config_.d_model;
  const std::size_t L = config_.n_layers;
  // With adapters the transformer itself is frozen.
  const bool base_trainable = !lora_.enabled;
  std::mt19937_64 rng(seed);

  token_table_ = add_param("embed.tokens", {config_.vocab_size, d},
                           normal_values(config_.vocab_size * d, 1.0, rng), base_trainable);
  visual_ = make_linear("encoder.visual", config_.frame_dim, d, true, true, 1.0, rng);
  speech_ = make_linear("encoder.speech", config_.speech_dim, d, true, true, 1.0, rng);
  audio_ = make_linear("encoder.audio", config_.audio_dim, d, true, true, 1.0, rng);

  const double residual_scale = 1.0 / std::sqrt(2.0 * static_cast<double>(L));
  blocks_.resize(L);
  for (std::size_t l = 0; l < L; ++l) {
    const std::string p = "blocks." + std::to_string(l);
    Block& b = blocks_[l];
    b.ln1_gain = add_param(p + ".ln1.gain", {d}, std::vector<double>(d, 1.0), base_trainable);
    b.ln1_bias = add_param(p + ".ln1.bias", {d}, std::vector<double>(d, 0.0), base_trainable);
    b.q = make_linear(p + ".attn.q", d, d, false, base_trainable, 1.0, rng);
    b.k = make_linear(p + ".attn.k", d, d, false, base_trainable, 1.0, rng);
    b.v = make_linear(p + ".attn.v", d, d, false, base_trainable, 1.0, rng);
    b.o = make_linear(p + ".attn.o", d, d, false, base_trainable, residual_scale, rng);
    b.ln2_gain = add_param(p + ".ln2.gain", {d}, std::vector<double>(d, 1.0), base_trainable);
    b.ln2_bias = add_param(p + ".ln2.bias", {d}, std::vector<double>(d, 0.0), base_trainable);
    b.fc1 = make_linear(p + ".mlp.fc1", d, config_.d_ff, true, base_trainable, 1.0, rng);
    b.fc2 = make_linear(p + ".mlp.fc2", config_.d_ff, d, true, base_trainable, residual_scale, rng);
  }

  pool_head_ = make_linear("head.pool", d, config_.d_embed, true, true, 1.0, rng);
  text_head_ = make_linear("head.text", d, config_.d_embed, true, true, 1.0, rng);
  layer_logits_ = add_param("head.layer_logits", {1, L}, std::vector<double>(L, 0.0), true);
  fusion_fc1_ = make_linear("head.fusion.fc1", config_.fusion_input_width(),
                            config_.fusion_hidden_width(), true, true, 1.0, rng);
  fusion_fc2_ = make_linear("head.fusion.fc2", config_.fusion_hidden_width(), config_.d_embed,
                            true, true, 1.0, rng);

  if (lora_.enabled) {
    // Separate stream so enabling adapters leaves every base draw unchanged.
    std::mt19937_64 lora_rng(seed ^ 0x9e3779b97f4a7c15ULL);
    for (std::size_t l = 0; l < L; ++l) {
      const std::string p = "blocks." + std::to_string(l);
      Block& b = blocks_[l];
      add_adapter(p + ".attn.q", b.q, lora_rng);
      add_adapter(p + ".attn.k", b.k, lora_rng);
      add_adapter(p + ".attn.v", b.v, lora_rng);
      add_adapter(p + ".attn.o", b.o, lora_rng);
      add_adapter(p + ".mlp.fc1", b.fc1, lora_rng);
      add_adapter(p + ".mlp.fc2", b.fc2, lora_rng);
    }
  }
}

Tensor WaveModel::parameter(std::string_view name) const {
  for (const auto& p : params_) {
    if (p.name == name) return p.tensor;
  }
  throw ArgumentError("unknown parameter '" + std::string(name) + "'");
}

std::vector<Tensor> WaveModel::trainable_parameters() const {
  std::vector<Tensor> out;
  for (const auto& p : params_) {
    if (p.trainable) out.push_back(p.tensor);
  }
  return out;
}

// ---- forward ----------------------------------------------------------------

Tensor WaveModel::plain_linear(const Tensor& x, const Linear& layer) const {
  Tensor y = matmul(x, layer.weight);
  return layer.bias.defined() ? add_row(y, layer.bias) : y;
}

Tensor WaveModel::apply_linear(const Tensor& x, const Linear& layer,
                               const ForwardOptions& options) const {
  Tensor y = plain_linear(x, layer);
  if (!layer.lora_a.defined()) return y;
  Tensor branch_in = x;
  if (options.training && lora_.dropout > 0.0) {
    if (!options.rng) throw ArgumentError("LoRA dropout in training needs an rng");
    std::bernoulli_distribution keep(1.0 - lora_.dropout);
    const double inv_keep = 1.0 / (1.0 - lora_.dropout);
    std::vector<double> mask(x.numel());
    for (auto& m : mask) m = keep(*options.rng) ? inv_keep : 0.0;
    branch_in = mul(x, Tensor(x.shape(), std::move(mask)));
  }
  const Tensor delta = matmul(matmul(branch_in, layer.lora_a), layer.lora_b);
  return add(y, scale(delta, lora_.scaling()));
}

EncodedSequence WaveModel::encode_modalities(const MultimodalSample& sample) const {
  sample.validate(config_.max_frames);
  TokenLayout layout = layout_tokens(sample);
  std::vector<std::size_t> ids;
  for (auto t : sample.instruction) ids.push_back(t);
  for (auto t : sample.text_tokens) ids.push_back(t);
  for (auto id : ids) {
    if (id >= config_.vocab_size) {
      throw ArgumentError("token id " + std::to_string(id) + " outside vocabulary of " +
                          std::to_string(config_.vocab_size));
    }
  }
  std::vector<Tensor> parts;
  std::size_t offsets[4] = {0, 0, 0, 0};
  std::size_t total = 0;
  auto push = [&](TokenOrigin origin, Tensor t) {
    offsets[static_cast<int>(origin)] = total;
    total += t.dim(0);
    parts.push_back(std::move(t));
  };
  if (!ids.empty()) push(TokenOrigin::text, gather_rows(token_table_, ids));
  auto encode_stream = [&](TokenOrigin origin, const FeatureSequence& seq, const Linear& enc,
                           std::size_t expected_dim) {
    if (seq.empty()) return;
    if (seq.dim != expected_dim) {
      throw DimensionError("feature dim " + std::to_string(seq.dim) + " but encoder expects " +
                           std::to_string(expected_dim));
    }
    push(origin, plain_linear(Tensor({seq.length(), seq.dim}, seq.values), enc));
  };
  encode_stream(TokenOrigin::visual, sample.frames, visual_, config_.frame_dim);
  encode_stream(TokenOrigin::speech, sample.speech, speech_, config_.speech_dim);
  encode_stream(TokenOrigin::audio, sample.audio, audio_, config_.audio_dim);
  if (parts.empty()) throw ArgumentError("sample has no tokens");

  std::vector<std::size_t> order;
  order.reserve(layout.slots.size());
  for (const auto& slot : layout.slots) order.push_back(offsets[static_cast<int>(slot.origin)] + slot.row);
  const Tensor stacked = parts.size() == 1 ? parts.front() : concat(parts, 0);
  return {gather_rows(stacked, order), std::move(layout)};
}

LayerStates WaveModel::forward(const MultimodalSample& sample, const ForwardOptions& options) const {
  const MultimodalSample* ptr = &sample;
  return forward_batch(std::span<const MultimodalSample* const>(&ptr, 1), options);
}

LayerStates WaveModel::forward_batch(std::span<const MultimodalSample* const> samples,
                                     const ForwardOptions& options) const {
  if (samples.empty()) throw EmptyBatchError("forward_batch: no samples");
  LayerStates states;
  std::vector<Tensor> sequences;
  std::vector<PositionId> positions;
  std::vector<std::size_t> last_rows;
  std::size_t offset = 0;
  for (const MultimodalSample* s : samples) {
    EncodedSequence enc = encode_modalities(*s);
    const std::size_t len = enc.tokens.dim(0);
    if (len > config_.max_seq_len) {
      throw CapacityError("encoded sequence of " + std::to_string(len) +
                          " tokens exceeds max_seq_len " + std::to_string(config_.max_seq_len));
    }
    states.segments.push_back({offset, len});
    states.kinds.push_back(s->kind);
    positions.insert(positions.end(), enc.layout.grid.ids.begin(), enc.layout.grid.ids.end());
    offset += len;
    last_rows.push_back(offset - 1);
    sequences.push_back(std::move(enc.tokens));
  }
  Tensor h = sequences.size() == 1 ? sequences.front() : concat(sequences, 0);
  auto table =
      std::make_shared<const RotaryTable>(positions, config_.rotary_dim(), config_.rope_base);

  for (const Block& b : blocks_) {
    const Tensor a = add_row(mul_row(layernorm(h), b.ln1_gain), b.ln1_bias);
    const Tensor q = apply_rotary(apply_linear(a, b.q, options), table, config_.n_heads);
    const Tensor k = apply_rotary(apply_linear(a, b.k, options), table, config_.n_heads);
    const Tensor v = apply_linear(a, b.v, options);
    const Tensor attn = causal_attention(q, k, v, states.segments, config_.n_heads);
    h = add(h, apply_linear(attn, b.o, options));
    const Tensor m = add_row(mul_row(layernorm(h), b.ln2_gain), b.ln2_bias);
    h = add(h, apply_linear(gelu(apply_linear(m, b.fc1, options)), b.fc2, options));
    states.last_tokens.push_back(gather_rows(h, last_rows));
  }
  states.final_sequence = h;
  return states;
}

// ---- embedding extraction ----------------------------------------------------

Tensor WaveModel::extract_embedding(const LayerStates& states, FusionStrategy strategy) const {
  const std::size_t batch = states.batch_size();
  const std::size_t L = config_.n_layers;
  if (states.last_tokens.size() != L) {
    throw DimensionError("layer states hold " + std::to_string(states.last_tokens.size()) +
                         " layers, model has " + std::to_string(L));
  }
  std::vector<std::size_t> text_rows, mm_rows;
  for (std::size_t i = 0; i < batch; ++i) {
    (states.kinds[i] == ModalityKind::text_only ? text_rows : mm_rows).push_back(i);
  }
  std::vector<Tensor> normed(L);
  auto layer = [&](std::size_t l, const std::vector<std::size_t>& rows) {
    if (!normed[l].defined()) normed[l] = layernorm(states.last_tokens[l]);
    return rows.size() == batch ? normed[l] : gather_rows(normed[l], rows);
  };

  std::vector<Tensor> parts;
  if (!text_rows.empty()) parts.push_back(plain_linear(layer(L - 1, text_rows), text_head_));
  if (!mm_rows.empty()) {
    Tensor emb;
    switch (strategy) {
      case FusionStrategy::first_layer:
      case FusionStrategy::middle_layer:
      case FusionStrategy::last_layer:
        emb = plain_linear(layer(config_.layer_index(strategy), mm_rows), pool_head_);
        break;
      case FusionStrategy::weighted_sum: {
        const Tensor w = softmax_rows(layer_logits_);
        Tensor acc;
        for (std::size_t l = 0; l < L; ++l) {
          Tensor term = mul_scalar(layer(l, mm_rows), slice(w, 1, l, l + 1));
          acc = acc.defined() ? add(acc, term) : term;
        }
        emb = plain_linear(acc, pool_head_);
        break;
      }
      case FusionStrategy::mlp_fusion: {
        std::vector<Tensor> all(L);
        for (std::size_t l = 0; l < L; ++l) all[l] = layer(l, mm_rows);
        const Tensor joined = L == 1 ? all.front() : concat(all, 1);
        emb = plain_linear(gelu(plain_linear(joined, fusion_fc1_)), fusion_fc2_);
        break;
      }
    }
    parts.push_back(std::move(emb));
  }
  if (parts.size() == 1) return parts.front();
  // Restore the original sample order.
  std::vector<std::size_t> order(batch);
  for (std::size_t j = 0; j < text_rows.size(); ++j) order[text_rows[j]] = j;
  for (std::size_t j = 0; j < mm_rows.size(); ++j) order[mm_rows[j]] = text_rows.size() + j;
  return gather_rows(concat(parts, 0), order);
}

Tensor WaveModel::embed(std::span<const MultimodalSample* const> samples,
                        const ForwardOptions& options) const {
  return extract_embedding(forward_batch(samples, options));
}

}  // namespace wave
