#include "wave/latent.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "wave/digest.hpp"
#include "wave/errors.hpp"
#include "wave/rng.hpp"

namespace wave {

std::string_view to_string(AttributeSlot slot) {
  switch (slot) {
    case AttributeSlot::object:
      return "object";
    case AttributeSlot::sound:
      return "sound";
    case AttributeSlot::speaker:
      return "speaker";
  }
  return "unknown";
}

AttributeSlot parse_attribute_slot(std::string_view name) {
  for (auto s : kAllSlots) {
    if (to_string(s) == name) return s;
  }
  throw ArgumentError("unknown attribute slot '" + std::string(name) + "'");
}

void LatentParams::validate() const {
  std::string errors;
  auto fail = [&](const std::string& msg) { errors += (errors.empty() ? "" : "; ") + msg; };
  if (num_classes < 2) fail("data.num_classes must be >= 2");
  if (attribute_values < 2) fail("data.attribute_values must be >= 2");
  if (latent_dim < 1) fail("data.latent_dim must be >= 1");
  if (frame_dim < 1 || speech_dim < 1 || audio_dim < 1) fail("data feature dims must be >= 1");
  if (!(noise >= 0.0)) fail("data.noise must be >= 0");
  if (min_frames < 1 || min_frames > max_frames) fail("data frame range must satisfy 1 <= min_frames <= max_frames");
  if (!errors.empty()) throw ValidationError(errors);
}

namespace {

double min_pairwise_distance(const std::vector<double>& rows, std::size_t k) {
  const std::size_t n = rows.size() / k;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double ss = 0.0;
      for (std::size_t c = 0; c < k; ++c) {
        const double d = rows[i * k + c] - rows[j * k + c];
        ss += d * d;
      }
      best = std::min(best, std::sqrt(ss));
    }
  }
  return best;
}

std::vector<double> draw_separated(std::size_t count, std::size_t k, double min_dist,
                                   std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int attempt = 0; attempt < 1000; ++attempt) {
    std::vector<double> rows(count * k);
    for (auto& v : rows) v = normal(rng);
    if (min_pairwise_distance(rows, k) > min_dist) return rows;
  }
  throw ValidationError("cannot draw " + std::to_string(count) + " latents of dim " +
                        std::to_string(k) + " separated by more than " + std::to_string(min_dist));
}

}  // namespace

LatentSpec LatentSpec::generate(const LatentParams& params) {
  params.validate();
  LatentSpec spec;
  spec.params_ = params;
  const std::size_t k = params.latent_dim;
  const double min_dist = 4.0 * params.noise;
  std::mt19937_64 rng(derive_seed(params.seed, {0x1a7e47}));
  spec.class_latents_ = draw_separated(params.num_classes, k, min_dist, rng);
  for (auto& block : spec.attrs_) block = draw_separated(params.attribute_values, k, min_dist, rng);
  std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(4 * k)));
  for (Stream s : {Stream::visual, Stream::speech, Stream::audio}) {
    auto& m = spec.render_[static_cast<std::size_t>(s)];
    m.resize(spec.feature_dim(s) * 4 * k);
    for (auto& v : m) v = normal(rng);
  }
  return spec;
}

std::size_t LatentSpec::feature_dim(Stream stream) const {
  switch (stream) {
    case Stream::visual:
      return params_.frame_dim;
    case Stream::speech:
      return params_.speech_dim;
    case Stream::audio:
      return params_.audio_dim;
  }
  return 0;
}

std::span<const double> LatentSpec::class_latent(std::size_t c) const {
  if (c >= params_.num_classes) throw ArgumentError("class " + std::to_string(c) + " out of range");
  return std::span<const double>(class_latents_).subspan(c * params_.latent_dim, params_.latent_dim);
}

std::span<const double> LatentSpec::attribute_latent(AttributeSlot slot, std::size_t value) const {
  if (value >= params_.attribute_values) {
    throw ArgumentError("attribute value " + std::to_string(value) + " out of range");
  }
  return std::span<const double>(attrs_[static_cast<std::size_t>(slot)])
      .subspan(value * params_.latent_dim, params_.latent_dim);
}

std::vector<double> LatentSpec::identity_latent(const Identity& id) const {
  std::vector<double> u;
  u.reserve(identity_dim());
  const auto c = class_latent(id.class_id);
  u.insert(u.end(), c.begin(), c.end());
  for (auto slot : kAllSlots) {
    const auto a = attribute_latent(slot, id.attribute(slot));
    u.insert(u.end(), a.begin(), a.end());
  }
  return u;
}

std::span<const double> LatentSpec::render_matrix(Stream stream) const {
  return render_[static_cast<std::size_t>(stream)];
}

std::vector<double> LatentSpec::render_mean(Stream stream, const Identity& id) const {
  const std::size_t k = params_.latent_dim, width = identity_dim();
  std::vector<double> u = identity_latent(id);
  const auto& gains = kStreamGains[static_cast<std::size_t>(stream)];
  for (std::size_t b = 0; b < 4; ++b)
    for (std::size_t j = 0; j < k; ++j) u[b * k + j] *= gains[b];
  const auto m = render_matrix(stream);
  std::vector<double> f(feature_dim(stream), 0.0);
  for (std::size_t r = 0; r < f.size(); ++r)
    for (std::size_t c = 0; c < width; ++c) f[r] += m[r * width + c] * u[c];
  return f;
}

FeatureSequence LatentSpec::render(Stream stream, const Identity& id, std::size_t frames,
                                   std::mt19937_64& rng) const {
  const auto mean = render_mean(stream, id);
  std::normal_distribution<double> noise(0.0, 1.0);
  FeatureSequence seq;
  seq.dim = mean.size();
  seq.values.reserve(frames * seq.dim);
  for (std::size_t t = 0; t < frames; ++t)
    for (double m : mean) seq.values.push_back(m + params_.noise * noise(rng));
  return seq;
}

double LatentSpec::min_class_distance() const {
  return min_pairwise_distance(class_latents_, params_.latent_dim);
}

double LatentSpec::min_attribute_distance() const {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& block : attrs_) best = std::min(best, min_pairwise_distance(block, params_.latent_dim));
  return best;
}

std::string LatentSpec::digest() const {
  std::ostringstream os;
  os.precision(17);
  const auto& p = params_;
  os << p.num_classes << ' ' << p.attribute_values << ' ' << p.latent_dim << ' ' << p.frame_dim
     << ' ' << p.speech_dim << ' ' << p.audio_dim << ' ' << p.noise << ' ' << p.min_frames << ' '
     << p.max_frames << ' ' << p.seed << '\n';
  auto dump = [&](const std::vector<double>& v) {
    os << encode_f64_le(v) << '\n';
  };
  dump(class_latents_);
  for (const auto& a : attrs_) dump(a);
  for (const auto& r : render_) dump(r);
  return sha256_hex(os.str());
}

TokenId Vocabulary::class_token(std::size_t c) const {
  if (c >= classes_) throw ArgumentError("class " + std::to_string(c) + " out of range");
  return static_cast<TokenId>(kFirstContent + c);
}

TokenId Vocabulary::attribute_token(AttributeSlot slot, std::size_t value) const {
  if (value >= values_) throw ArgumentError("attribute value " + std::to_string(value) + " out of range");
  return static_cast<TokenId>(kFirstContent + classes_ + static_cast<std::size_t>(slot) * values_ + value);
}

TokenId Vocabulary::question_token(AttributeSlot slot) const {
  switch (slot) {
    case AttributeSlot::object:
      return kAskObject;
    case AttributeSlot::sound:
      return kAskSound;
    case AttributeSlot::speaker:
      return kAskSpeaker;
  }
  return kPad;
}

std::vector<TokenId> Vocabulary::caption(const Identity& id) const {
  return {class_token(id.class_id), attribute_token(AttributeSlot::object, id.attribute(AttributeSlot::object)),
          attribute_token(AttributeSlot::sound, id.attribute(AttributeSlot::sound)),
          attribute_token(AttributeSlot::speaker, id.attribute(AttributeSlot::speaker)), kEos};
}

std::vector<TokenId> Vocabulary::answer(AttributeSlot slot, std::size_t value) const {
  return {attribute_token(slot, value), kEos};
}

}  // namespace wave
