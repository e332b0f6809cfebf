#include <algorithm>

#include "re2re/kernels.hpp"

namespace re2re::kernels::serial {

void conv1d(const ConvGeometry& g, std::span<const double> signal, std::span<const double> kernels,
            std::span<double> out) {
  const std::size_t frames = g.frames();
  for (std::size_t b = 0; b < g.batch; ++b)
    for (std::size_t f = 0; f < g.filters; ++f)
      for (std::size_t t = 0; t < frames; ++t) {
        double acc = 0.0;
        for (std::size_t k = 0; k < g.taps; ++k)
          acc += kernels[f * g.taps + k] * signal[b * g.length + t * g.stride + k];
        out[(b * g.filters + f) * frames + t] = acc;
      }
}

// Scatter form: every (frame, tap) pair deposits into the sample it came from.
void conv1d_transposed(const ConvGeometry& g, std::span<const double> features,
                       std::span<const double> kernels, std::span<double> out) {
  const std::size_t frames = g.frames();
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t b = 0; b < g.batch; ++b)
    for (std::size_t f = 0; f < g.filters; ++f)
      for (std::size_t t = 0; t < frames; ++t) {
        const double v = features[(b * g.filters + f) * frames + t];
        for (std::size_t k = 0; k < g.taps; ++k) out[b * g.length + t * g.stride + k] += kernels[f * g.taps + k] * v;
      }
}

void conv1d_kernel_grad(const ConvGeometry& g, std::span<const double> signal,
                        std::span<const double> grad_out, std::span<double> grad_kernels) {
  const std::size_t frames = g.frames();
  std::fill(grad_kernels.begin(), grad_kernels.end(), 0.0);
  for (std::size_t b = 0; b < g.batch; ++b)
    for (std::size_t f = 0; f < g.filters; ++f)
      for (std::size_t t = 0; t < frames; ++t) {
        const double go = grad_out[(b * g.filters + f) * frames + t];
        for (std::size_t k = 0; k < g.taps; ++k)
          grad_kernels[f * g.taps + k] += go * signal[b * g.length + t * g.stride + k];
      }
}

void channel_mix(const MixGeometry& g, std::span<const double> in, std::span<const double> weights,
                 std::span<const double> bias, std::span<double> out) {
  for (std::size_t b = 0; b < g.batch; ++b)
    for (std::size_t o = 0; o < g.out_channels; ++o)
      for (std::size_t t = 0; t < g.frames; ++t) {
        double acc = bias[o];
        for (std::size_t c = 0; c < g.in_channels; ++c)
          acc += weights[o * g.in_channels + c] * in[(b * g.in_channels + c) * g.frames + t];
        out[(b * g.out_channels + o) * g.frames + t] = acc;
      }
}

void channel_mix_input_grad(const MixGeometry& g, std::span<const double> weights,
                            std::span<const double> grad_out, std::span<double> grad_in) {
  for (std::size_t b = 0; b < g.batch; ++b)
    for (std::size_t c = 0; c < g.in_channels; ++c)
      for (std::size_t t = 0; t < g.frames; ++t) {
        double acc = 0.0;
        for (std::size_t o = 0; o < g.out_channels; ++o)
          acc += weights[o * g.in_channels + c] * grad_out[(b * g.out_channels + o) * g.frames + t];
        grad_in[(b * g.in_channels + c) * g.frames + t] = acc;
      }
}

void channel_mix_param_grad(const MixGeometry& g, std::span<const double> in,
                            std::span<const double> grad_out, std::span<double> grad_weights,
                            std::span<double> grad_bias) {
  std::fill(grad_weights.begin(), grad_weights.end(), 0.0);
  std::fill(grad_bias.begin(), grad_bias.end(), 0.0);
  for (std::size_t b = 0; b < g.batch; ++b)
    for (std::size_t o = 0; o < g.out_channels; ++o)
      for (std::size_t t = 0; t < g.frames; ++t) {
        const double go = grad_out[(b * g.out_channels + o) * g.frames + t];
        grad_bias[o] += go;
        for (std::size_t c = 0; c < g.in_channels; ++c)
          grad_weights[o * g.in_channels + c] += go * in[(b * g.in_channels + c) * g.frames + t];
      }
}

}  // namespace re2re::kernels::serial
