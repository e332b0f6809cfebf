// Serial reference vs OpenMP kernels at separator-sized geometries.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "re2re/kernels.hpp"

namespace k = re2re::kernels;

namespace {

std::vector<double> random_vector(std::size_t n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

// batch 24 of 1 s at 8 kHz, args: filters, taps, hop
k::ConvGeometry conv_geometry(const benchmark::State& state) {
  return {24, 8010, static_cast<std::size_t>(state.range(0)), static_cast<std::size_t>(state.range(1)),
          static_cast<std::size_t>(state.range(2))};
}

template <bool Parallel>
void BM_Conv1d(benchmark::State& state) {
  const auto g = conv_geometry(state);
  const auto x = random_vector(g.batch * g.length, 1);
  const auto w = random_vector(g.filters * g.taps, 2);
  std::vector<double> out(g.batch * g.filters * g.frames());
  for (auto _ : state) {
    if constexpr (Parallel) k::conv1d(g, x, w, out);
    else k::serial::conv1d(g, x, w, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(out.size() * g.taps));
}

template <bool Parallel>
void BM_Conv1dTransposed(benchmark::State& state) {
  const auto g = conv_geometry(state);
  const auto f = random_vector(g.batch * g.filters * g.frames(), 1);
  const auto w = random_vector(g.filters * g.taps, 2);
  std::vector<double> out(g.batch * g.length);
  for (auto _ : state) {
    if constexpr (Parallel) k::conv1d_transposed(g, f, w, out);
    else k::serial::conv1d_transposed(g, f, w, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(f.size() * g.taps));
}

template <bool Parallel>
void BM_KernelGrad(benchmark::State& state) {
  const auto g = conv_geometry(state);
  const auto x = random_vector(g.batch * g.length, 1);
  const auto go = random_vector(g.batch * g.filters * g.frames(), 2);
  std::vector<double> out(g.filters * g.taps);
  for (auto _ : state) {
    if constexpr (Parallel) k::conv1d_kernel_grad(g, x, go, out);
    else k::serial::conv1d_kernel_grad(g, x, go, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(go.size() * g.taps));
}

// args: channels, frames
template <bool Parallel>
void BM_ChannelMix(benchmark::State& state) {
  const k::MixGeometry g{24, static_cast<std::size_t>(state.range(0)), static_cast<std::size_t>(state.range(0)),
                         static_cast<std::size_t>(state.range(1))};
  const auto in = random_vector(g.batch * g.in_channels * g.frames, 1);
  const auto w = random_vector(g.out_channels * g.in_channels, 2);
  const auto b = random_vector(g.out_channels, 3);
  std::vector<double> out(g.batch * g.out_channels * g.frames);
  for (auto _ : state) {
    if constexpr (Parallel) k::channel_mix(g, in, w, b, out);
    else k::serial::channel_mix(g, in, w, b, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(out.size() * g.in_channels));
}

template <bool Parallel>
void BM_ChannelMixParamGrad(benchmark::State& state) {
  const k::MixGeometry g{24, static_cast<std::size_t>(state.range(0)), static_cast<std::size_t>(state.range(0)),
                         static_cast<std::size_t>(state.range(1))};
  const auto in = random_vector(g.batch * g.in_channels * g.frames, 1);
  const auto go = random_vector(g.batch * g.out_channels * g.frames, 2);
  std::vector<double> gw(g.out_channels * g.in_channels), gb(g.out_channels);
  for (auto _ : state) {
    if constexpr (Parallel) k::channel_mix_param_grad(g, in, go, gw, gb);
    else k::serial::channel_mix_param_grad(g, in, go, gw, gb);
    benchmark::DoNotOptimize(gw.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(go.size() * g.in_channels));
}

}  // namespace

BENCHMARK(BM_Conv1d<false>)->Name("conv1d/serial")->Args({16, 81, 20})->Args({64, 21, 10})->UseRealTime();
BENCHMARK(BM_Conv1d<true>)->Name("conv1d/openmp")->Args({16, 81, 20})->Args({64, 21, 10})->UseRealTime();
BENCHMARK(BM_Conv1dTransposed<false>)->Name("conv1d_transposed/serial")->Args({16, 81, 20})->Args({64, 21, 10})->UseRealTime();
BENCHMARK(BM_Conv1dTransposed<true>)->Name("conv1d_transposed/openmp")->Args({16, 81, 20})->Args({64, 21, 10})->UseRealTime();
BENCHMARK(BM_KernelGrad<false>)->Name("conv1d_kernel_grad/serial")->Args({16, 81, 20})->Args({64, 21, 10})->UseRealTime();
BENCHMARK(BM_KernelGrad<true>)->Name("conv1d_kernel_grad/openmp")->Args({16, 81, 20})->Args({64, 21, 10})->UseRealTime();
BENCHMARK(BM_ChannelMix<false>)->Name("channel_mix/serial")->Args({16, 400})->Args({64, 800})->UseRealTime();
BENCHMARK(BM_ChannelMix<true>)->Name("channel_mix/openmp")->Args({16, 400})->Args({64, 800})->UseRealTime();
BENCHMARK(BM_ChannelMixParamGrad<false>)->Name("channel_mix_param_grad/serial")->Args({16, 400})->Args({64, 800})->UseRealTime();
BENCHMARK(BM_ChannelMixParamGrad<true>)->Name("channel_mix_param_grad/openmp")->Args({16, 400})->Args({64, 800})->UseRealTime();

BENCHMARK_MAIN();
