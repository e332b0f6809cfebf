#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <random>

#include "re2re/error.hpp"
#include "re2re/synthdata.hpp"
#include "re2re/wav.hpp"

namespace re2re {

using nlohmann::json;

std::string_view domain_name(Domain d) { return d == Domain::Ood ? "ood" : "indomain"; }

Domain domain_from_name(std::string_view name) {
  if (name == "ood") return Domain::Ood;
  if (name == "indomain") return Domain::InDomain;
  throw ValidationError("unknown domain '" + std::string(name) + "'");
}

std::string_view noise_kind_name(NoiseKind k) {
  switch (k) {
    case NoiseKind::White: return "white";
    case NoiseKind::Pink: return "pink";
    case NoiseKind::Bandpassed: return "bandpassed";
  }
  return "unknown";
}

NoiseKind noise_kind_from_name(std::string_view name) {
  if (name == "white") return NoiseKind::White;
  if (name == "pink") return NoiseKind::Pink;
  if (name == "bandpassed") return NoiseKind::Bandpassed;
  throw ValidationError("unknown noise kind '" + std::string(name) + "'");
}

std::string_view split_name(Split s) { return s == Split::Train ? "train" : "eval"; }

Split split_from_name(std::string_view name) {
  if (name == "train") return Split::Train;
  if (name == "eval") return Split::Eval;
  throw ValidationError("unknown split '" + std::string(name) + "'");
}

CorpusSpec CorpusSpec::defaults(Domain domain) {
  CorpusSpec spec;
  spec.domain = domain;
  if (domain == Domain::Ood) {
    // Cleaner and less spread than the in-domain N(5, 7) dB.
    spec.noise_kind = NoiseKind::White;
    spec.snr_mean_db = 10.0;
    spec.snr_std_db = 4.0;
  } else {
    spec.noise_kind = NoiseKind::Pink;
  }
  return spec;
}

void CorpusSpec::validate() const {
  require(chunk_seconds > 0.0 && std::isfinite(chunk_seconds), "chunk_seconds must be positive");
  require(sample_rate >= 1000.0 && sample_rate <= 192000.0, "sample_rate must lie in [1000, 192000]");
  require(snr_std_db >= 0.0 && std::isfinite(snr_std_db), "snr_std_db must be >= 0");
  require(std::isfinite(snr_mean_db), "snr_mean_db must be finite");
  require(speech_kind == "harmonic-am", "speech_kind must be 'harmonic-am'");
  require(num_train + num_eval >= 1, "num_train + num_eval must be at least 1");
  require(chunk_samples() >= 64, "chunk_seconds * sample_rate must give at least 64 samples");
}

std::size_t CorpusSpec::chunk_samples() const {
  return static_cast<std::size_t>(std::llround(chunk_seconds * sample_rate));
}

std::vector<ManifestRecord> Manifest::split(Split s) const {
  std::vector<ManifestRecord> out;
  for (const auto& r : records)
    if (r.split == s) out.push_back(r);
  return out;
}

void validate_record(const ManifestRecord& r) {
  require(!r.id.empty(), "manifest record without id");
  require(!r.mixture.empty(), "manifest record '" + r.id + "' has no mixture path");
  require(r.speech.has_value() == r.noise.has_value(),
          "manifest record '" + r.id + "' must list both speech and noise or neither");
  if (r.domain == Domain::InDomain && r.split == Split::Train)
    require(!r.speech && !r.noise, "manifest record '" + r.id + "': in-domain training data must be unlabeled");
}

namespace {

json record_to_json(const ManifestRecord& r) {
  json j;
  j["schema_version"] = kManifestSchemaVersion;
  j["id"] = r.id;
  j["domain"] = domain_name(r.domain);
  j["split"] = split_name(r.split);
  j["noise_kind"] = noise_kind_name(r.noise_kind);
  j["mixture"] = r.mixture;
  if (r.speech) j["speech"] = *r.speech;
  if (r.noise) j["noise"] = *r.noise;
  j["snr_db"] = r.snr_db;
  j["snr_target_db"] = r.snr_target_db;
  return j;
}

ManifestRecord record_from_json(const json& j) {
  const int version = j.at("schema_version").get<int>();
  require(version == kManifestSchemaVersion, "manifest schema_version " + std::to_string(version) +
                                                 " is not supported (expected " +
                                                 std::to_string(kManifestSchemaVersion) + ")");
  ManifestRecord r;
  r.id = j.at("id").get<std::string>();
  r.domain = domain_from_name(j.at("domain").get<std::string>());
  r.split = split_from_name(j.at("split").get<std::string>());
  r.noise_kind = noise_kind_from_name(j.at("noise_kind").get<std::string>());
  r.mixture = j.at("mixture").get<std::string>();
  if (j.contains("speech") && !j["speech"].is_null()) r.speech = j["speech"].get<std::string>();
  if (j.contains("noise") && !j["noise"].is_null()) r.noise = j["noise"].get<std::string>();
  r.snr_db = j.at("snr_db").get<double>();
  r.snr_target_db = j.value("snr_target_db", r.snr_db);
  validate_record(r);
  return r;
}

}  // namespace

Manifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest '" + path.string() + "'");
  Manifest m;
  m.root = path.parent_path();
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      m.records.push_back(record_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const ValidationError& e) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return m;
}

void write_manifest(const std::filesystem::path& path, const Manifest& manifest) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write manifest '" + path.string() + "'");
  for (const auto& r : manifest.records) {
    validate_record(r);
    out << record_to_json(r).dump() << '\n';
  }
  if (!out) throw IoError("failed writing manifest '" + path.string() + "'");
}

namespace {

struct Utterance {
  std::vector<double> speech;
  std::vector<double> noise;
  double snr_target = 0.0;
};

// Draws one utterance. Components come back already on the 16-bit grid, so
// the mixture written to disk is exactly their sum.
Utterance draw_utterance(const CorpusSpec& spec, Rng& rng) {
  Utterance u;
  u.speech = gen_speechlike(spec, rng);
  u.noise = gen_noise(spec.noise_kind, spec, rng);
  std::normal_distribution<double> snr(spec.snr_mean_db, spec.snr_std_db);
  u.snr_target = spec.snr_std_db > 0.0 ? snr(rng) : spec.snr_mean_db;
  const double clipped = std::clamp(u.snr_target, kMinSnrDb, kMaxSnrDb);

  double ps = 0.0, pn = 0.0;
  for (std::size_t i = 0; i < u.speech.size(); ++i) {
    ps += u.speech[i] * u.speech[i];
    pn += u.noise[i] * u.noise[i];
  }
  const double gain = std::sqrt(ps / (pn * std::pow(10.0, clipped / 10.0)));
  double peak = 0.0;
  for (std::size_t i = 0; i < u.noise.size(); ++i) {
    u.noise[i] *= gain;
    peak = std::max(peak, std::abs(u.speech[i] + u.noise[i]));
  }
  // Keep the mixture clear of the PCM rails; a common gain leaves the SNR unchanged.
  const double headroom = peak > 0.95 ? 0.95 / peak : 1.0;
  for (std::size_t i = 0; i < u.speech.size(); ++i) {
    u.speech[i] = quantize_pcm16(u.speech[i] * headroom);
    u.noise[i] = quantize_pcm16(u.noise[i] * headroom);
  }
  return u;
}

}  // namespace

Manifest synthesize_corpus(const CorpusSpec& spec, const std::filesystem::path& out_dir) {
  spec.validate();
  std::error_code ec;
  for (const char* sub : {"train", "eval"}) {
    std::filesystem::create_directories(out_dir / sub, ec);
    if (ec) throw IoError("cannot create '" + (out_dir / sub).string() + "': " + ec.message());
  }
  const auto sr = static_cast<std::uint32_t>(std::lround(spec.sample_rate));
  const std::size_t total = spec.num_train + spec.num_eval;

  Manifest manifest;
  manifest.root = out_dir;
  manifest.records.resize(total);
  std::vector<std::exception_ptr> errors(total);

  // Every utterance owns an RNG substream keyed by (split, index), so the
  // schedule below cannot change what gets written.
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t job = 0; job < static_cast<std::int64_t>(total); ++job) {
    const auto i = static_cast<std::size_t>(job);
    const Split split = i < spec.num_train ? Split::Train : Split::Eval;
    const std::size_t index = split == Split::Train ? i : i - spec.num_train;
    try {
      Rng rng = make_rng(spec.seed, (std::uint64_t{split == Split::Train ? 0u : 1u} << 32) | index);
      const Utterance u = draw_utterance(spec, rng);

      ManifestRecord& r = manifest.records[i];
      char id[64];
      std::snprintf(id, sizeof id, "%s-%s-%05zu", std::string(domain_name(spec.domain)).c_str(),
                    std::string(split_name(split)).c_str(), index);
      r.id = id;
      r.domain = spec.domain;
      r.split = split;
      r.noise_kind = spec.noise_kind;
      r.snr_target_db = u.snr_target;
      r.snr_db = snr_db(u.speech, u.noise);
      const std::string dir = std::string(split_name(split)) + "/";
      r.mixture = dir + r.id + "_mix.wav";

      std::vector<double> mixture(u.speech.size());
      for (std::size_t t = 0; t < mixture.size(); ++t) mixture[t] = u.speech[t] + u.noise[t];
      write_wav(out_dir / r.mixture, mixture, sr);
      const bool unlabeled = spec.domain == Domain::InDomain && split == Split::Train;
      if (!unlabeled) {
        r.speech = dir + r.id + "_speech.wav";
        r.noise = dir + r.id + "_noise.wav";
        write_wav(out_dir / *r.speech, u.speech, sr);
        write_wav(out_dir / *r.noise, u.noise, sr);
      }
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  write_manifest(out_dir / "manifest.jsonl", manifest);
  return manifest;
}

}  // namespace re2re
