#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "wave/attention.hpp"
#include "wave/model_config.hpp"
#include "wave/sample.hpp"
#include "wave/tensor.hpp"
#include "wave/tmrope.hpp"

namespace wave {

struct NamedParameter {
  std::string name;
  Tensor tensor;
  bool trainable = true;
};

/// Per-layer last-token states of a (packed) batch.
struct LayerStates {
  std::vector<Tensor> last_tokens;  // n_layers entries, each [batch × d_model]
  Tensor final_sequence;            // [total tokens × d_model], last layer
  std::vector<Segment> segments;    // one per sample, into final_sequence
  std::vector<ModalityKind> kinds;  // one per sample

  std::size_t batch_size() const { return segments.size(); }
  /// Last-token vector of `layer` for sample `index`.
  std::vector<double> layer_vector(std::size_t layer, std::size_t index = 0) const;
};

struct EncodedSequence {
  Tensor tokens;  // [T × d_model]
  TokenLayout layout;
};

struct ForwardOptions {
  bool training = false;        // enables LoRA dropout
  std::mt19937_64* rng = nullptr;  // dropout randomness; required when training with dropout
};

/// The toy audio-visual embedding network.
///
/// Parameters are created deterministically from `seed`. Base weights are
/// drawn before any LoRA adapter, so models that differ only in whether LoRA
/// is enabled share identical base weights.
class WaveModel {
 public:
  WaveModel(ModelConfig config, LoraConfig lora, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  const LoraConfig& lora() const { return lora_; }

  EncodedSequence encode_modalities(const MultimodalSample& sample) const;

  LayerStates forward(const MultimodalSample& sample, const ForwardOptions& options = {}) const;
  LayerStates forward_batch(std::span<const MultimodalSample* const> samples,
                            const ForwardOptions& options = {}) const;

  /// [batch × d_embed]. Text-only samples always use last-layer pooling through
  /// the text head; other samples use `strategy`.
  Tensor extract_embedding(const LayerStates& states, FusionStrategy strategy) const;
  Tensor extract_embedding(const LayerStates& states) const {
    return extract_embedding(states, config_.fusion_strategy);
  }

  Tensor embed(std::span<const MultimodalSample* const> samples,
               const ForwardOptions& options = {}) const;

  std::vector<NamedParameter>& parameters() { return params_; }
  const std::vector<NamedParameter>& parameters() const { return params_; }
  /// Throws ArgumentError for an unknown name.
  Tensor parameter(std::string_view name) const;
  std::vector<Tensor> trainable_parameters() const;

 private:
  struct Linear {
    Tensor weight;  // [in × out]
    Tensor bias;    // [out], may be undefined
    Tensor lora_a;  // [in × r], undefined without LoRA
    Tensor lora_b;  // [r × out]
  };
  struct Block {
    Tensor ln1_gain, ln1_bias, ln2_gain, ln2_bias;
    Linear q, k, v, o, fc1, fc2;
  };

  Linear make_linear(const std::string& name, std::size_t in, std::size_t out, bool bias,
                     bool trainable, double std_scale, std::mt19937_64& rng);
  void add_adapter(const std::string& name, Linear& layer, std::mt19937_64& rng);
  Tensor add_param(std::string name, Shape shape, std::vector<double> values, bool trainable);
  Tensor apply_linear(const Tensor& x, const Linear& layer, const ForwardOptions& options) const;
  Tensor plain_linear(const Tensor& x, const Linear& layer) const;

  ModelConfig config_;
  LoraConfig lora_;
  std::vector<NamedParameter> params_;
  Tensor token_table_;
  Linear visual_, speech_, audio_;
  std::vector<Block> blocks_;
  Linear pool_head_, text_head_;
  Tensor layer_logits_;  // [1 × n_layers]
  Linear fusion_fc1_, fusion_fc2_;
};

}  // namespace wave
