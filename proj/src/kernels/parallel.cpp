#include <algorithm>
#include <cstdint>

#include "re2re/kernels.hpp"

#if defined(_OPENMP)
#include <omp.h>
#endif

namespace re2re::kernels {

namespace {
// Below this many multiply-adds a parallel region costs more than it saves.
constexpr std::size_t kParallelWork = 1 << 15;
using Index = std::int64_t;

// Fixed 8-lane accumulation: vectorizes, and the summation order depends only on n.
inline double dot_lanes(const double* a, const double* b, std::size_t n) {
  double lane[8] = {};
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    for (std::size_t l = 0; l < 8; ++l) lane[l] += a[i + l] * b[i + l];
  double acc = ((lane[0] + lane[1]) + (lane[2] + lane[3])) + ((lane[4] + lane[5]) + (lane[6] + lane[7]));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}
}  // namespace

int max_threads() {
#if defined(_OPENMP)
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void set_threads([[maybe_unused]] int n) {
#if defined(_OPENMP)
  if (n > 0) omp_set_num_threads(n);
#endif
}

void conv1d(const ConvGeometry& g, std::span<const double> signal, std::span<const double> kernels,
            std::span<double> out) {
  const std::size_t frames = g.frames();
  const Index jobs = static_cast<Index>(g.batch * g.filters);
  const bool par = jobs * frames * g.taps > kParallelWork;
#pragma omp parallel for schedule(static) if (par)
  for (Index job = 0; job < jobs; ++job) {
    const std::size_t b = static_cast<std::size_t>(job) / g.filters;
    const std::size_t f = static_cast<std::size_t>(job) % g.filters;
    const double* w = kernels.data() + f * g.taps;
    const double* x = signal.data() + b * g.length;
    double* y = out.data() + static_cast<std::size_t>(job) * frames;
    for (std::size_t t = 0; t < frames; ++t) {
      const double* xt = x + t * g.stride;
      double acc = 0.0;
      for (std::size_t k = 0; k < g.taps; ++k) acc += w[k] * xt[k];
      y[t] = acc;
    }
  }
}

// Gather form: each output sample sums the (frame, tap) pairs that touch it, so
// samples can be produced independently.
// Rows are independent; within a row the scatter runs in the reference order.
void conv1d_transposed(const ConvGeometry& g, std::span<const double> features,
                       std::span<const double> kernels, std::span<double> out) {
  const std::size_t frames = g.frames();
  const Index rows = static_cast<Index>(g.batch);
  const bool par = static_cast<std::size_t>(rows) * g.filters * frames * g.taps > kParallelWork;
#pragma omp parallel for schedule(static) if (par)
  for (Index b = 0; b < rows; ++b) {
    const double* feat = features.data() + static_cast<std::size_t>(b) * g.filters * frames;
    double* y = out.data() + static_cast<std::size_t>(b) * g.length;
    std::fill(y, y + g.length, 0.0);
    for (std::size_t f = 0; f < g.filters; ++f) {
      const double* kf = kernels.data() + f * g.taps;
      for (std::size_t t = 0; t < frames; ++t) {
        const double v = feat[f * frames + t];
        double* yt = y + t * g.stride;
        for (std::size_t k = 0; k < g.taps; ++k) yt[k] += kf[k] * v;
      }
    }
  }
}

// One filter per job; each tap accumulates over (row, frame) in the reference order.
void conv1d_kernel_grad(const ConvGeometry& g, std::span<const double> signal,
                        std::span<const double> grad_out, std::span<double> grad_kernels) {
  const std::size_t frames = g.frames();
  const Index filters = static_cast<Index>(g.filters);
  const bool par = g.filters * g.taps * g.batch * frames > kParallelWork;
#pragma omp parallel for schedule(static) if (par)
  for (Index fi = 0; fi < filters; ++fi) {
    const auto f = static_cast<std::size_t>(fi);
    double* gk = grad_kernels.data() + f * g.taps;
    std::fill(gk, gk + g.taps, 0.0);
    for (std::size_t b = 0; b < g.batch; ++b) {
      const double* go = grad_out.data() + (b * g.filters + f) * frames;
      const double* x = signal.data() + b * g.length;
      for (std::size_t t = 0; t < frames; ++t) {
        const double v = go[t];
        const double* xt = x + t * g.stride;
        for (std::size_t k = 0; k < g.taps; ++k) gk[k] += v * xt[k];
      }
    }
  }
}

namespace {

// y[o][t] = init[o] + sum_c w[o * w_stride + c * w_step] * x[c][t] for a block of
// kRows outputs over a tile of kTile frames, accumulated in registers. Channels
// are added in ascending order, as in the serial reference.
constexpr std::size_t kRows = 4;
constexpr std::size_t kTile = 4;

template <std::size_t R>
void mix_block(const double* w, std::size_t w_stride, std::size_t w_step, const double* init, const double* x,
               std::size_t channels, std::size_t frames, double* y) {
  std::size_t t0 = 0;
  for (; t0 + kTile <= frames; t0 += kTile) {
    double acc[R][kTile];
    for (std::size_t r = 0; r < R; ++r)
      for (std::size_t j = 0; j < kTile; ++j) acc[r][j] = init[r];
    for (std::size_t c = 0; c < channels; ++c) {
      const double* xc = x + c * frames + t0;
      for (std::size_t r = 0; r < R; ++r) {
        const double wr = w[r * w_stride + c * w_step];
        for (std::size_t j = 0; j < kTile; ++j) acc[r][j] += wr * xc[j];
      }
    }
    for (std::size_t r = 0; r < R; ++r)
      for (std::size_t j = 0; j < kTile; ++j) y[r * frames + t0 + j] = acc[r][j];
  }
  for (std::size_t t = t0; t < frames; ++t)
    for (std::size_t r = 0; r < R; ++r) {
      double acc = init[r];
      for (std::size_t c = 0; c < channels; ++c) acc += w[r * w_stride + c * w_step] * x[c * frames + t];
      y[r * frames + t] = acc;
    }
}

// Output rows [o0, o0 + count) of one batch row.
void mix_rows(const double* w, std::size_t w_stride, std::size_t w_step, const double* init, const double* x,
              std::size_t channels, std::size_t frames, double* y, std::size_t count) {
  std::size_t r = 0;
  for (; r + kRows <= count; r += kRows)
    mix_block<kRows>(w + r * w_stride, w_stride, w_step, init + r, x, channels, frames, y + r * frames);
  for (; r < count; ++r) mix_block<1>(w + r * w_stride, w_stride, w_step, init + r, x, channels, frames, y + r * frames);
}

}  // namespace

void channel_mix(const MixGeometry& g, std::span<const double> in, std::span<const double> weights,
                 std::span<const double> bias, std::span<double> out) {
  const std::size_t blocks = (g.out_channels + kRows - 1) / kRows;
  const Index jobs = static_cast<Index>(g.batch * blocks);
  const bool par = g.batch * g.out_channels * g.in_channels * g.frames > kParallelWork;
#pragma omp parallel for schedule(static) if (par)
  for (Index job = 0; job < jobs; ++job) {
    const std::size_t b = static_cast<std::size_t>(job) / blocks;
    const std::size_t o0 = static_cast<std::size_t>(job) % blocks * kRows;
    const std::size_t count = std::min(kRows, g.out_channels - o0);
    mix_rows(weights.data() + o0 * g.in_channels, g.in_channels, 1, bias.data() + o0,
             in.data() + b * g.in_channels * g.frames, g.in_channels, g.frames,
             out.data() + (b * g.out_channels + o0) * g.frames, count);
  }
}

void channel_mix_input_grad(const MixGeometry& g, std::span<const double> weights,
                            std::span<const double> grad_out, std::span<double> grad_in) {
  const std::size_t blocks = (g.in_channels + kRows - 1) / kRows;
  const Index jobs = static_cast<Index>(g.batch * blocks);
  const bool par = g.batch * g.out_channels * g.in_channels * g.frames > kParallelWork;
  const double zeros[kRows] = {};
#pragma omp parallel for schedule(static) if (par)
  for (Index job = 0; job < jobs; ++job) {
    const std::size_t b = static_cast<std::size_t>(job) / blocks;
    const std::size_t c0 = static_cast<std::size_t>(job) % blocks * kRows;
    const std::size_t count = std::min(kRows, g.in_channels - c0);
    // Transposed weights: row c, column o lives at weights[o * C + c].
    mix_rows(weights.data() + c0, 1, g.in_channels, zeros, grad_out.data() + b * g.out_channels * g.frames,
             g.out_channels, g.frames, grad_in.data() + (b * g.in_channels + c0) * g.frames, count);
  }
}

void channel_mix_param_grad(const MixGeometry& g, std::span<const double> in,
                            std::span<const double> grad_out, std::span<double> grad_weights,
                            std::span<double> grad_bias) {
  const Index jobs = static_cast<Index>(g.out_channels * g.in_channels);
  const bool par = jobs * g.batch * g.frames > kParallelWork;
#pragma omp parallel for schedule(static) if (par)
  for (Index job = 0; job < jobs; ++job) {
    const std::size_t o = static_cast<std::size_t>(job) / g.in_channels;
    const std::size_t c = static_cast<std::size_t>(job) % g.in_channels;
    double acc = 0.0;
    for (std::size_t b = 0; b < g.batch; ++b) {
      const double* go = grad_out.data() + (b * g.out_channels + o) * g.frames;
      const double* x = in.data() + (b * g.in_channels + c) * g.frames;
      acc += dot_lanes(go, x, g.frames);
    }
    grad_weights[static_cast<std::size_t>(job)] = acc;
  }
  for (std::size_t o = 0; o < g.out_channels; ++o) {
    double acc = 0.0;
    for (std::size_t b = 0; b < g.batch; ++b) {
      const double* go = grad_out.data() + (b * g.out_channels + o) * g.frames;
      for (std::size_t t = 0; t < g.frames; ++t) acc += go[t];
    }
    grad_bias[o] = acc;
  }
}

}  // namespace re2re::kernels
