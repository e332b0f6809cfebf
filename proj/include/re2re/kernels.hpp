#pragma once

#include <cstddef>
#include <span>

// Hot loops of the separator. The default namespace holds the OpenMP versions;
// kernels::serial keeps straightforward single-threaded references that the
// tests and the benchmark compare against.
//
// Parallel kernels split work only over independent outputs, and each output
// is accumulated in a fixed order, so results do not depend on thread count.

namespace re2re::kernels {

struct ConvGeometry {
  std::size_t batch = 1;
  std::size_t length = 1;   // input samples per row
  std::size_t filters = 1;
  std::size_t taps = 1;
  std::size_t stride = 1;

  std::size_t frames() const { return (length - taps) / stride + 1; }
  bool valid() const { return batch > 0 && filters > 0 && taps > 0 && stride > 0 && length >= taps; }
};

struct MixGeometry {
  std::size_t batch = 1;
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  std::size_t frames = 1;
};

// out[b, f, t] = sum_k kernels[f, k] * signal[b, t * stride + k]
void conv1d(const ConvGeometry& g, std::span<const double> signal, std::span<const double> kernels,
            std::span<double> out);
// out[b, t * stride + k] += kernels[f, k] * features[b, f, t]; out is overwritten.
void conv1d_transposed(const ConvGeometry& g, std::span<const double> features,
                       std::span<const double> kernels, std::span<double> out);
// grad_kernels[f, k] = sum_{b, t} grad_out[b, f, t] * signal[b, t * stride + k]; overwritten.
void conv1d_kernel_grad(const ConvGeometry& g, std::span<const double> signal,
                        std::span<const double> grad_out, std::span<double> grad_kernels);

// out[b, g, t] = bias[g] + sum_c weights[g, c] * in[b, c, t]
void channel_mix(const MixGeometry& g, std::span<const double> in, std::span<const double> weights,
                 std::span<const double> bias, std::span<double> out);
// grad_in[b, c, t] = sum_g weights[g, c] * grad_out[b, g, t]; overwritten.
void channel_mix_input_grad(const MixGeometry& g, std::span<const double> weights,
                            std::span<const double> grad_out, std::span<double> grad_in);
// grad_weights[g, c] = sum_{b, t} grad_out[b, g, t] * in[b, c, t]; grad_bias[g] = sum grad_out.
void channel_mix_param_grad(const MixGeometry& g, std::span<const double> in,
                            std::span<const double> grad_out, std::span<double> grad_weights,
                            std::span<double> grad_bias);

int max_threads();
void set_threads(int n);

namespace serial {

void conv1d(const ConvGeometry& g, std::span<const double> signal, std::span<const double> kernels,
            std::span<double> out);
void conv1d_transposed(const ConvGeometry& g, std::span<const double> features,
                       std::span<const double> kernels, std::span<double> out);
void conv1d_kernel_grad(const ConvGeometry& g, std::span<const double> signal,
                        std::span<const double> grad_out, std::span<double> grad_kernels);
void channel_mix(const MixGeometry& g, std::span<const double> in, std::span<const double> weights,
                 std::span<const double> bias, std::span<double> out);
void channel_mix_input_grad(const MixGeometry& g, std::span<const double> weights,
                            std::span<const double> grad_out, std::span<double> grad_in);
void channel_mix_param_grad(const MixGeometry& g, std::span<const double> in,
                            std::span<const double> grad_out, std::span<double> grad_weights,
                            std::span<double> grad_bias);

}  // namespace serial
}  // namespace re2re::kernels
