#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "re2re/rng.hpp"
#include "re2re/signal.hpp"
#include "re2re/tape.hpp"

namespace re2re {

enum class MaskMode {
  /// Two-source softmax masks followed by a mixture-consistency projection:
  /// speech + noise reproduces the input exactly.
  SoftmaxConsistent,
  /// Independent sigmoid masks; outputs need not add up to the input.
  Free,
};

std::string_view mask_mode_name(MaskMode m);
MaskMode mask_mode_from_name(std::string_view name);

struct SeparatorConfig {
  std::size_t num_filters = 16;
  std::size_t kernel_taps = 81;
  std::size_t hop = 20;
  std::size_t num_blocks = 2;
  MaskMode mask_mode = MaskMode::SoftmaxConsistent;
  double sample_rate = 8000.0;

  /// Encoder/decoder geometry of the full-size recipe (512 filters, 41 taps,
  /// hop 20, 8 blocks). Far too slow to train here; kept for reference runs.
  static SeparatorConfig full_scale();

  void validate() const;
  bool same_layout(const SeparatorConfig& other) const {
    return num_filters == other.num_filters && kernel_taps == other.kernel_taps && num_blocks == other.num_blocks;
  }
  bool operator==(const SeparatorConfig&) const = default;
};

struct ParamSegment {
  std::string name;
  std::size_t offset = 0;
  Shape shape;
  std::size_t fan_in = 1;
};

/// Segments in storage order:
///   encoder [F, K]
///   per block i: block{i}.weight [F, F], block{i}.bias [F], block{i}.slope [1]
///   speech_head.weight [F, F], speech_head.bias [F]
///   noise_head.weight [F, F], noise_head.bias [F]
///   decoder [F, K]
std::vector<ParamSegment> param_layout(const SeparatorConfig& config);

/// 2FK + blocks (F^2 + F + 1) + 2 (F^2 + F)
std::size_t parameter_count(const SeparatorConfig& config);

/// Flat trainable parameters of one separator (teacher or student).
class ParamVector {
 public:
  ParamVector() = default;
  ParamVector(SeparatorConfig config, std::vector<double> values);

  const SeparatorConfig& config() const { return config_; }
  const std::vector<double>& values() const { return values_; }
  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }

  bool same_layout(const ParamVector& other) const { return config_.same_layout(other.config_); }
  bool operator==(const ParamVector& other) const { return same_layout(other) && values_ == other.values_; }

 private:
  SeparatorConfig config_;
  std::vector<double> values_;
};

/// Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)) with fan_in = K for the
/// encoder, F for the mixing layers and the decoder; biases likewise; PReLU
/// slopes start at kInitialSlope.
ParamVector init_params(const SeparatorConfig& config, Rng& rng);
inline constexpr double kInitialSlope = 0.25;

struct SeparatorOutputs {
  diff::Var speech;
  diff::Var noise;
};

/// Differentiable forward pass. `mixture` is [B, T]; `params` is the flat
/// parameter leaf (or a constant when no gradient is wanted).
SeparatorOutputs forward(const SeparatorConfig& config, diff::Var mixture, diff::Var params);

/// Gradient-free convenience wrapper.
std::pair<SignalBatch, SignalBatch> separate(const ParamVector& params, const SignalBatch& mixture);

/// theta_T <- gamma theta_S + (1 - gamma) theta_T
ParamVector wma_update(const ParamVector& teacher, const ParamVector& student, double gamma);

/// Smallest length >= max(T, K) that the encoder covers without leftover samples.
std::size_t padded_length(std::size_t length, std::size_t taps, std::size_t hop);
/// Mirror-pads each row on the right (edge sample not repeated).
Tensor reflect_pad(const Tensor& batch, std::size_t padded);

}  // namespace re2re
