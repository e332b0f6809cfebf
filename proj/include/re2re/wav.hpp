#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace re2re {

struct WavData {
  std::vector<double> samples;  // in [-1, 1)
  std::uint32_t sample_rate = 8000;
};

/// 16-bit PCM mono. Samples are rounded to the nearest step of 2^-15 and
/// clipped to the representable range.
void write_wav(const std::filesystem::path& path, std::span<const double> samples, std::uint32_t sample_rate);
WavData read_wav(const std::filesystem::path& path);

/// Value the sample will have after a write/read round trip.
double quantize_pcm16(double x);
inline constexpr double kPcm16Step = 1.0 / 32768.0;

}  // namespace re2re
