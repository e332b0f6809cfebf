#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "re2re/rng.hpp"

namespace re2re {

enum class Domain { Ood, InDomain };
enum class NoiseKind { White, Pink, Bandpassed };
enum class Split { Train, Eval };

std::string_view domain_name(Domain d);
Domain domain_from_name(std::string_view name);
std::string_view noise_kind_name(NoiseKind k);
NoiseKind noise_kind_from_name(std::string_view name);
std::string_view split_name(Split s);
Split split_from_name(std::string_view name);

/// Generator settings for one corpus (one domain, a train and an eval split).
struct CorpusSpec {
  Domain domain = Domain::Ood;
  std::size_t num_train = 200;
  std::size_t num_eval = 50;
  double chunk_seconds = 1.0;
  double sample_rate = 8000.0;
  std::string speech_kind = "harmonic-am";
  NoiseKind noise_kind = NoiseKind::White;
  double snr_mean_db = 5.0;
  double snr_std_db = 7.0;
  std::uint64_t seed = 0;

  /// Out-of-domain: white noise at N(10, 4) dB SNR. In-domain: pink noise at
  /// N(5, 7) dB.
  static CorpusSpec defaults(Domain domain);

  void validate() const;
  std::size_t chunk_samples() const;
  bool operator==(const CorpusSpec&) const = default;
};

inline constexpr double kMinSnrDb = -10.0;
inline constexpr double kMaxSnrDb = 20.0;
inline constexpr double kSpeechPeak = 0.5;
inline constexpr int kManifestSchemaVersion = 1;

struct ManifestRecord {
  std::string id;
  Domain domain = Domain::Ood;
  Split split = Split::Train;
  NoiseKind noise_kind = NoiseKind::White;
  std::string mixture;  // relative to the manifest directory
  std::optional<std::string> speech;
  std::optional<std::string> noise;
  double snr_db = 0.0;         // measured on the written components
  double snr_target_db = 0.0;  // drawn before clipping/quantization

  bool labeled() const { return speech.has_value() && noise.has_value(); }
};

/// JSON-lines manifest. In-domain training records never carry component
/// paths; reading a manifest that violates this fails.
struct Manifest {
  std::filesystem::path root;  // directory the record paths are relative to
  std::vector<ManifestRecord> records;

  std::vector<ManifestRecord> split(Split s) const;
};

Manifest read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const Manifest& manifest);
void validate_record(const ManifestRecord& record);

/// Harmonic tone complex (3-5 harmonics, f0 in [100, 300] Hz with a slight
/// glide) under a smooth syllable envelope with silent gaps, peak 0.5.
std::vector<double> gen_speechlike(const CorpusSpec& spec, Rng& rng);

/// Zero-mean, unit-variance noise. Pink is 1/f in power, bandpassed keeps
/// [300, 2000] Hz; both shaped in the frequency domain.
std::vector<double> gen_noise(NoiseKind kind, const CorpusSpec& spec, Rng& rng);

/// Writes <out>/manifest.jsonl plus WAV files under <out>/train and <out>/eval.
Manifest synthesize_corpus(const CorpusSpec& spec, const std::filesystem::path& out_dir);

/// 10*log10(|s|^2 / |n|^2)
double snr_db(const std::vector<double>& speech, const std::vector<double>& noise);

}  // namespace re2re
