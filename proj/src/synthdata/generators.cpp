#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <mutex>
#include <numbers>
#include <random>

#include "re2re/error.hpp"
#include "re2re/synthdata.hpp"

namespace re2re {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kEnvelopeFloor = 0.01;  // -40 dB
constexpr double kMinGapFraction = 0.12;
constexpr double kMaxGapFraction = 0.38;
constexpr double kBandLowHz = 300.0;
constexpr double kBandHighHz = 2000.0;

// Tukey window: flat top, cosine tapers over `taper` of the length in total.
double tukey(std::size_t i, std::size_t n, double taper) {
  if (n < 2) return 1.0;
  const double x = static_cast<double>(i) / static_cast<double>(n - 1);
  const double edge = taper / 2.0;
  if (x < edge) return 0.5 * (1.0 - std::cos(std::numbers::pi * x / edge));
  if (x > 1.0 - edge) return 0.5 * (1.0 - std::cos(std::numbers::pi * (1.0 - x) / edge));
  return 1.0;
}

std::vector<double> draw_envelope(std::size_t n, double sr, Rng& rng) {
  std::uniform_real_distribution<double> on_ms(180.0, 350.0);
  std::uniform_real_distribution<double> gap_ms(40.0, 100.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> env(n, 0.0);
  std::size_t pos = unit(rng) < 0.5 ? static_cast<std::size_t>(gap_ms(rng) * sr / 1000.0) : 0;
  while (pos < n) {
    const auto len = static_cast<std::size_t>(on_ms(rng) * sr / 1000.0);
    const double rate = 3.0 + 3.0 * unit(rng);  // syllable-rate wobble, Hz
    const double depth = 0.3 * unit(rng);
    const double phase = kTwoPi * unit(rng);
    for (std::size_t i = 0; i < len && pos + i < n; ++i) {
      const double t = static_cast<double>(i) / sr;
      env[pos + i] = tukey(i, len, 0.2) * (1.0 - depth * (0.5 + 0.5 * std::sin(kTwoPi * rate * t + phase)));
    }
    pos += len + static_cast<std::size_t>(gap_ms(rng) * sr / 1000.0);
  }
  return env;
}

double gap_fraction(const std::vector<double>& env) {
  const double peak = *std::max_element(env.begin(), env.end());
  const auto below = std::count_if(env.begin(), env.end(), [&](double v) { return v < kEnvelopeFloor * peak; });
  return static_cast<double>(below) / static_cast<double>(env.size());
}

void normalize_moments(std::vector<double>& x) {
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  double var = 0.0;
  for (double& v : x) {
    v -= mean;
    var += v * v;
  }
  const double std = std::sqrt(var / static_cast<double>(x.size()));
  require(std > 0.0, "gen_noise: degenerate noise draw");
  for (double& v : x) v /= std;
}

// FFTW planning is not thread-safe; execution on separate plans is.
std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};

// Multiplies the spectrum of `x` by gain(frequency_hz) and transforms back.
template <typename Gain>
void shape_spectrum(std::vector<double>& x, double sr, Gain gain) {
  const std::size_t n = x.size();
  const std::size_t bins = n / 2 + 1;
  std::unique_ptr<double, FftwFree> time(static_cast<double*>(fftw_malloc(sizeof(double) * n)));
  std::unique_ptr<fftw_complex, FftwFree> freq(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * bins)));
  fftw_plan forward = nullptr;
  fftw_plan inverse = nullptr;
  {
    std::lock_guard lock(fftw_planner_mutex());
    forward = fftw_plan_dft_r2c_1d(static_cast<int>(n), time.get(), freq.get(), FFTW_ESTIMATE);
    inverse = fftw_plan_dft_c2r_1d(static_cast<int>(n), freq.get(), time.get(), FFTW_ESTIMATE);
  }
  std::copy(x.begin(), x.end(), time.get());
  fftw_execute(forward);
  for (std::size_t k = 0; k < bins; ++k) {
    const double g = gain(static_cast<double>(k) * sr / static_cast<double>(n));
    freq.get()[k][0] *= g;
    freq.get()[k][1] *= g;
  }
  fftw_execute(inverse);
  std::copy(time.get(), time.get() + n, x.begin());
  std::lock_guard lock(fftw_planner_mutex());
  fftw_destroy_plan(forward);
  fftw_destroy_plan(inverse);
}

}  // namespace

std::vector<double> gen_speechlike(const CorpusSpec& spec, Rng& rng) {
  const std::size_t n = spec.chunk_samples();
  const double sr = spec.sample_rate;
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::vector<double> env = draw_envelope(n, sr, rng);
  for (int attempt = 0; attempt < 1000; ++attempt) {
    const double frac = gap_fraction(env);
    if (frac >= kMinGapFraction && frac <= kMaxGapFraction) break;
    env = draw_envelope(n, sr, rng);
  }

  const double f0_start = 100.0 + 200.0 * unit(rng);
  const double f0_end = std::clamp(f0_start * (0.9 + 0.2 * unit(rng)), 100.0, 300.0);
  const int harmonics = 3 + static_cast<int>(unit(rng) * 3.0);
  std::vector<double> amp(static_cast<std::size_t>(harmonics));
  std::vector<double> phase(static_cast<std::size_t>(harmonics));
  for (int h = 0; h < harmonics; ++h) {
    amp[static_cast<std::size_t>(h)] = (0.3 + 0.7 * unit(rng)) / static_cast<double>(h + 1);
    phase[static_cast<std::size_t>(h)] = kTwoPi * unit(rng);
  }

  std::vector<double> out(n, 0.0);
  double base_phase = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double f0 = f0_start + (f0_end - f0_start) * static_cast<double>(i) / static_cast<double>(n);
    double v = 0.0;
    for (int h = 0; h < harmonics; ++h) {
      if ((h + 1) * f0 >= sr / 2.0) break;
      v += amp[static_cast<std::size_t>(h)] * std::sin((h + 1) * base_phase + phase[static_cast<std::size_t>(h)]);
    }
    out[i] = env[i] * v;
    base_phase = std::fmod(base_phase + kTwoPi * f0 / sr, kTwoPi);
  }
  double peak = 0.0;
  for (double v : out) peak = std::max(peak, std::abs(v));
  require(peak > 0.0, "gen_speechlike: silent draw");
  for (double& v : out) v *= kSpeechPeak / peak;
  return out;
}

std::vector<double> gen_noise(NoiseKind kind, const CorpusSpec& spec, Rng& rng) {
  const std::size_t n = spec.chunk_samples();
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> x(n);
  for (double& v : x) v = normal(rng);
  switch (kind) {
    case NoiseKind::White:
      break;
    case NoiseKind::Pink:
      shape_spectrum(x, spec.sample_rate, [](double f) { return f > 0.0 ? 1.0 / std::sqrt(f) : 0.0; });
      break;
    case NoiseKind::Bandpassed:
      shape_spectrum(x, spec.sample_rate, [](double f) { return f >= kBandLowHz && f <= kBandHighHz ? 1.0 : 0.0; });
      break;
    default:
      throw ValidationError("gen_noise: unknown noise kind");
  }
  normalize_moments(x);
  return x;
}

double snr_db(const std::vector<double>& speech, const std::vector<double>& noise) {
  require(speech.size() == noise.size(), "snr_db: length mismatch");
  double ps = 0.0, pn = 0.0;
  for (std::size_t i = 0; i < speech.size(); ++i) {
    ps += speech[i] * speech[i];
    pn += noise[i] * noise[i];
  }
  require(ps > 0.0 && pn > 0.0, "snr_db: silent component");
  return 10.0 * std::log10(ps / pn);
}

}  // namespace re2re
