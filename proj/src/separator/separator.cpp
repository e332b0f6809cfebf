#include "re2re/separator.hpp"

#include <cmath>
#include <random>

#include "re2re/error.hpp"

namespace re2re {

std::string_view mask_mode_name(MaskMode m) {
  return m == MaskMode::SoftmaxConsistent ? "softmax-consistent" : "free";
}

MaskMode mask_mode_from_name(std::string_view name) {
  if (name == "softmax-consistent") return MaskMode::SoftmaxConsistent;
  if (name == "free") return MaskMode::Free;
  throw ValidationError("unknown mask_mode '" + std::string(name) + "'");
}

SeparatorConfig SeparatorConfig::full_scale() {
  SeparatorConfig c;
  c.num_filters = 512;
  c.kernel_taps = 41;
  c.hop = 20;
  c.num_blocks = 8;
  c.sample_rate = 16000.0;
  return c;
}

void SeparatorConfig::validate() const {
  require(num_filters >= 2, "model.num_filters must be at least 2");
  require(kernel_taps >= 1, "model.kernel_taps must be at least 1");
  require(hop >= 1, "model.hop must be at least 1");
  require(num_blocks >= 1, "model.num_blocks must be at least 1");
  require(sample_rate > 0.0, "model.sample_rate must be positive");
}

std::vector<ParamSegment> param_layout(const SeparatorConfig& config) {
  config.validate();
  const std::size_t f = config.num_filters;
  const std::size_t k = config.kernel_taps;
  std::vector<ParamSegment> out;
  std::size_t offset = 0;
  auto add = [&](std::string name, Shape shape, std::size_t fan_in) {
    const std::size_t n = numel(shape);
    out.push_back({std::move(name), offset, std::move(shape), fan_in});
    offset += n;
  };
  add("encoder", {f, k}, k);
  for (std::size_t i = 0; i < config.num_blocks; ++i) {
    const std::string p = "block" + std::to_string(i);
    add(p + ".weight", {f, f}, f);
    add(p + ".bias", {f}, f);
    add(p + ".slope", {1}, 1);
  }
  add("speech_head.weight", {f, f}, f);
  add("speech_head.bias", {f}, f);
  add("noise_head.weight", {f, f}, f);
  add("noise_head.bias", {f}, f);
  add("decoder", {f, k}, f);
  return out;
}

std::size_t parameter_count(const SeparatorConfig& config) {
  const std::size_t f = config.num_filters;
  const std::size_t k = config.kernel_taps;
  return 2 * f * k + config.num_blocks * (f * f + f + 1) + 2 * (f * f + f);
}

ParamVector::ParamVector(SeparatorConfig config, std::vector<double> values)
    : config_(config), values_(std::move(values)) {
  require(values_.size() == parameter_count(config_),
          "parameter vector has " + std::to_string(values_.size()) + " values, layout needs " +
              std::to_string(parameter_count(config_)));
}

ParamVector init_params(const SeparatorConfig& config, Rng& rng) {
  std::vector<double> values(parameter_count(config));
  for (const auto& seg : param_layout(config)) {
    const std::size_t n = numel(seg.shape);
    if (seg.name.ends_with(".slope")) {
      for (std::size_t i = 0; i < n; ++i) values[seg.offset + i] = kInitialSlope;
      continue;
    }
    const double bound = 1.0 / std::sqrt(static_cast<double>(seg.fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (std::size_t i = 0; i < n; ++i) values[seg.offset + i] = dist(rng);
  }
  return ParamVector(config, std::move(values));
}

std::size_t padded_length(std::size_t length, std::size_t taps, std::size_t hop) {
  std::size_t padded = std::max(length, taps);
  const std::size_t rem = (padded - taps) % hop;
  if (rem != 0) padded += hop - rem;
  return padded;
}

Tensor reflect_pad(const Tensor& batch, std::size_t padded) {
  require(batch.rank() == 2, "reflect_pad expects [B, T]");
  const std::size_t rows = batch.dim(0), len = batch.dim(1);
  require(padded >= len, "reflect_pad: target shorter than input");
  Tensor out({rows, padded});
  const std::size_t period = len > 1 ? 2 * len - 2 : 1;
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t i = 0; i < padded; ++i) {
      std::size_t j = 0;
      if (len > 1) {
        const std::size_t m = i % period;
        j = m < len ? m : period - m;
      }
      out[r * padded + i] = batch[r * len + j];
    }
  return out;
}

SeparatorOutputs forward(const SeparatorConfig& config, diff::Var mixture, diff::Var params) {
  config.validate();
  const Tensor& x = mixture.value();
  require(x.rank() == 2, "separator input must be [B, T], got " + to_string(x.shape()));
  require(params.value().size() == parameter_count(config),
          "separator parameters have " + std::to_string(params.value().size()) + " values, config needs " +
              std::to_string(parameter_count(config)));
  diff::Tape& tape = *mixture.tape;
  const std::size_t length = x.dim(1);
  const std::size_t padded = padded_length(length, config.kernel_taps, config.hop);

  const auto layout = param_layout(config);
  std::size_t next = 0;
  auto take = [&]() {
    const ParamSegment& seg = layout[next++];
    return diff::segment(params, seg.offset, seg.shape);
  };

  diff::Var input = padded == length ? mixture : tape.constant(reflect_pad(x, padded));
  diff::Var encoder = take();
  diff::Var features = diff::relu(diff::conv1d(input, encoder, config.hop));

  diff::Var hidden = features;
  for (std::size_t i = 0; i < config.num_blocks; ++i) {
    diff::Var w = take();
    diff::Var b = take();
    diff::Var slope = take();
    hidden = diff::add(hidden, diff::prelu(diff::channel_mix(hidden, w, b), slope));
  }
  diff::Var speech_w = take();
  diff::Var speech_b = take();
  diff::Var noise_w = take();
  diff::Var noise_b = take();
  diff::Var decoder = take();

  diff::Var speech_logits = diff::channel_mix(hidden, speech_w, speech_b);
  diff::Var noise_logits = diff::channel_mix(hidden, noise_w, noise_b);
  diff::Var speech_mask;
  diff::Var noise_mask;
  if (config.mask_mode == MaskMode::SoftmaxConsistent) {
    diff::Var masks = diff::softmax_sources(diff::stack({speech_logits, noise_logits}));
    speech_mask = diff::select(masks, 0);
    noise_mask = diff::select(masks, 1);
  } else {
    speech_mask = diff::sigmoid(speech_logits);
    noise_mask = diff::sigmoid(noise_logits);
  }

  auto decode = [&](diff::Var mask) {
    diff::Var wave = diff::conv1d_transposed(diff::mul(mask, features), decoder, config.hop, padded);
    return padded == length ? wave : diff::crop_last(wave, length);
  };
  diff::Var speech = decode(speech_mask);
  diff::Var noise = decode(noise_mask);

  if (config.mask_mode == MaskMode::SoftmaxConsistent) {
    // Split whatever the decoder failed to reconstruct evenly between the two
    // sources so that speech + noise == mixture.
    diff::Var half_residual = diff::scale(diff::sub(mixture, diff::add(speech, noise)), 0.5);
    speech = diff::add(speech, half_residual);
    noise = diff::add(noise, half_residual);
  }
  return {speech, noise};
}

std::pair<SignalBatch, SignalBatch> separate(const ParamVector& params, const SignalBatch& mixture) {
  diff::Tape tape;
  diff::Var x = tape.constant(mixture.to_tensor());
  diff::Var theta = tape.constant(Tensor({params.size()}, params.values()));
  auto out = forward(params.config(), x, theta);
  return {SignalBatch::from_tensor(out.speech.value(), Role::StudentSpeech, mixture.sample_rate()),
          SignalBatch::from_tensor(out.noise.value(), Role::StudentNoise, mixture.sample_rate())};
}

ParamVector wma_update(const ParamVector& teacher, const ParamVector& student, double gamma) {
  require(teacher.same_layout(student) && teacher.size() == student.size(),
          "wma_update: teacher and student parameter layouts differ");
  require(gamma >= 0.0 && gamma <= 1.0, "wma_update: gamma must lie in [0, 1]");
  std::vector<double> out(teacher.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = gamma * student[i] + (1.0 - gamma) * teacher[i];
  return ParamVector(teacher.config(), std::move(out));
}

}  // namespace re2re
