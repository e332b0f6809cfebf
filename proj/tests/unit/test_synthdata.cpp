#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "re2re/error.hpp"
#include "re2re/synthdata.hpp"
#include "re2re/wav.hpp"
#include "test_util.hpp"

using namespace re2re;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "re2re_test_synthdata" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

CorpusSpec small_spec(Domain domain, std::uint64_t seed) {
  CorpusSpec s = CorpusSpec::defaults(domain);
  s.num_train = 6;
  s.num_eval = 4;
  s.chunk_seconds = 0.25;
  s.seed = seed;
  return s;
}

// Averaged Hann-windowed periodogram at one frequency.
double welch_power(const std::vector<double>& x, double sr, double freq, std::size_t seg = 512) {
  double acc = 0.0;
  int count = 0;
  for (std::size_t start = 0; start + seg <= x.size(); start += seg / 2) {
    double re = 0.0, im = 0.0;
    for (std::size_t i = 0; i < seg; ++i) {
      const double w = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / (seg - 1));
      const double ph = 2.0 * std::numbers::pi * freq * i / sr;
      re += w * x[start + i] * std::cos(ph);
      im -= w * x[start + i] * std::sin(ph);
    }
    acc += re * re + im * im;
    ++count;
  }
  return acc / count;
}

}  // namespace

TEST_CASE("names round trip") {
  CHECK(domain_from_name(domain_name(Domain::InDomain)) == Domain::InDomain);
  CHECK(noise_kind_from_name(noise_kind_name(NoiseKind::Bandpassed)) == NoiseKind::Bandpassed);
  CHECK(split_from_name(split_name(Split::Eval)) == Split::Eval);
  CHECK_THROWS_AS(noise_kind_from_name("brown"), ValidationError);
  CHECK_THROWS_AS(domain_from_name("chime"), ValidationError);
  CHECK(CorpusSpec::defaults(Domain::Ood).noise_kind == NoiseKind::White);
  CHECK(CorpusSpec::defaults(Domain::InDomain).noise_kind == NoiseKind::Pink);
  CHECK(CorpusSpec{}.snr_mean_db == 5.0);
  CHECK(CorpusSpec{}.snr_std_db == 7.0);
}

TEST_CASE("spec validation") {
  CorpusSpec s;
  s.chunk_seconds = 0.0;
  CHECK_THROWS_AS(s.validate(), ValidationError);
  s = CorpusSpec{};
  s.snr_std_db = -1.0;
  CHECK_THROWS_AS(s.validate(), ValidationError);
  s = CorpusSpec{};
  s.speech_kind = "librispeech";
  CHECK_THROWS_AS(s.validate(), ValidationError);
}

TEST_CASE("speech-like generator") {
  const CorpusSpec spec;
  Rng a(3), b(3);
  CHECK(gen_speechlike(spec, a) == gen_speechlike(spec, b));

  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const auto s = gen_speechlike(spec, rng);
    REQUIRE(s.size() == 8000);
    double peak = 0.0;
    for (double v : s) peak = std::max(peak, std::abs(v));
    CHECK(peak == doctest::Approx(0.5).epsilon(1e-9));

    // 2.5 ms frames; silent when 40 dB below the loudest frame.
    const std::size_t frame = 20;
    std::vector<double> rms;
    for (std::size_t i = 0; i + frame <= s.size(); i += frame) {
      double e = 0.0;
      for (std::size_t j = 0; j < frame; ++j) e += s[i + j] * s[i + j];
      rms.push_back(std::sqrt(e / frame));
    }
    const double loudest = *std::max_element(rms.begin(), rms.end());
    const auto silent = std::count_if(rms.begin(), rms.end(), [&](double r) { return r < 0.01 * loudest; });
    const double fraction = double(silent) / double(rms.size());
    CHECK(fraction >= 0.10);
    CHECK(fraction <= 0.40);
  }
}

TEST_CASE("noise generators are zero-mean and unit-variance") {
  CorpusSpec spec;
  spec.chunk_seconds = 2.0;
  for (NoiseKind kind : {NoiseKind::White, NoiseKind::Pink, NoiseKind::Bandpassed}) {
    Rng rng(4);
    const auto x = gen_noise(kind, spec, rng);
    double mean = 0.0, var = 0.0;
    for (double v : x) mean += v;
    mean /= double(x.size());
    for (double v : x) var += (v - mean) * (v - mean);
    var /= double(x.size());
    CHECK(std::abs(mean) < 1e-3 * std::sqrt(var));
    CHECK(var == doctest::Approx(1.0).epsilon(1e-9));
    Rng again(4);
    CHECK(gen_noise(kind, spec, again) == x);
  }
  Rng rng(5);
  CHECK_THROWS_AS(gen_noise(static_cast<NoiseKind>(17), spec, rng), ValidationError);
}

TEST_CASE("white noise has no lag-1 correlation") {
  CorpusSpec spec;
  spec.chunk_seconds = 2.0;  // 16000 samples
  Rng rng(6);
  const auto x = gen_noise(NoiseKind::White, spec, rng);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    den += x[i] * x[i];
    if (i + 1 < x.size()) num += x[i] * x[i + 1];
  }
  CHECK(std::abs(num / den) < 0.05);
}

TEST_CASE("pink noise falls 3 dB per octave") {
  CorpusSpec spec;
  spec.chunk_seconds = 4.0;
  Rng rng(7);
  const auto x = gen_noise(NoiseKind::Pink, spec, rng);
  // Least-squares slope of dB power against octaves over [100, 2000] Hz.
  std::vector<double> oct, db;
  for (double f = 100.0; f <= 2000.0; f *= std::pow(2.0, 0.25)) {
    oct.push_back(std::log2(f));
    db.push_back(10.0 * std::log10(welch_power(x, spec.sample_rate, f)));
  }
  double mo = 0.0, md = 0.0;
  for (std::size_t i = 0; i < oct.size(); ++i) {
    mo += oct[i] / oct.size();
    md += db[i] / db.size();
  }
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < oct.size(); ++i) {
    sxy += (oct[i] - mo) * (db[i] - md);
    sxx += (oct[i] - mo) * (oct[i] - mo);
  }
  const double slope = sxy / sxx;
  CHECK(slope == doctest::Approx(-3.0).epsilon(1.0 / 3.0));
}

TEST_CASE("bandpassed noise stays inside its band") {
  CorpusSpec spec;
  spec.chunk_seconds = 2.0;
  Rng rng(8);
  const auto x = gen_noise(NoiseKind::Bandpassed, spec, rng);
  const double in_band = welch_power(x, spec.sample_rate, 1000.0);
  CHECK(10.0 * std::log10(in_band / welch_power(x, spec.sample_rate, 3200.0)) > 30.0);
  CHECK(10.0 * std::log10(in_band / welch_power(x, spec.sample_rate, 100.0)) > 20.0);
}

TEST_CASE("wav round trip") {
  const auto dir = fresh_dir("wav");
  Rng rng(9);
  auto x = test::uniform(1000, rng, -0.9, 0.9);
  x[0] = 2.0;   // clipped
  x[1] = -2.0;
  write_wav(dir / "a.wav", x, 16000);
  const WavData w = read_wav(dir / "a.wav");
  CHECK(w.sample_rate == 16000);
  REQUIRE(w.samples.size() == x.size());
  for (std::size_t i = 2; i < x.size(); ++i) {
    CHECK(std::abs(w.samples[i] - x[i]) <= kPcm16Step);
    CHECK(w.samples[i] == quantize_pcm16(x[i]));
  }
  CHECK(w.samples[0] == doctest::Approx(32767.0 / 32768.0));
  CHECK(w.samples[1] == -1.0);

  const std::string bytes = slurp(dir / "a.wav");
  {
    std::ofstream out(dir / "short.wav", std::ios::binary);
    out << bytes.substr(0, 30);
  }
  CHECK_THROWS_AS(read_wav(dir / "short.wav"), IoError);
  {
    std::ofstream out(dir / "cut.wav", std::ios::binary);
    out << bytes.substr(0, bytes.size() - 100);
  }
  CHECK_THROWS_AS(read_wav(dir / "cut.wav"), IoError);
  {
    std::string riff = bytes;
    riff[0] = 'X';
    std::ofstream out(dir / "riff.wav", std::ios::binary);
    out << riff;
  }
  CHECK_THROWS_AS(read_wav(dir / "riff.wav"), IoError);
  CHECK_THROWS_AS(read_wav(dir / "missing.wav"), IoError);
}

TEST_CASE("corpus synthesis") {
  const auto a = fresh_dir("corpus_a");
  const auto b = fresh_dir("corpus_b");
  const Manifest m = synthesize_corpus(small_spec(Domain::Ood, 21), a);
  synthesize_corpus(small_spec(Domain::Ood, 21), b);
  REQUIRE(m.records.size() == 10);
  CHECK(m.split(Split::Train).size() == 6);
  CHECK(m.split(Split::Eval).size() == 4);

  SUBCASE("same spec and seed give byte-identical files") {
    CHECK(slurp(a / "manifest.jsonl") == slurp(b / "manifest.jsonl"));
    for (const auto& r : m.records) {
      CHECK(slurp(a / r.mixture) == slurp(b / r.mixture));
      CHECK(slurp(a / *r.speech) == slurp(b / *r.speech));
    }
  }
  SUBCASE("written files reproduce the recorded SNR and the mixture sum") {
    for (const auto& r : m.records) {
      REQUIRE(r.labeled());
      const auto s = read_wav(a / *r.speech).samples;
      const auto n = read_wav(a / *r.noise).samples;
      const auto x = read_wav(a / r.mixture).samples;
      CHECK(std::abs(snr_db(s, n) - r.snr_db) < 0.01);
      CHECK(r.snr_db >= kMinSnrDb - 0.01);
      CHECK(r.snr_db <= kMaxSnrDb + 0.01);
      for (std::size_t t = 0; t < x.size(); ++t) CHECK(std::abs(x[t] - (s[t] + n[t])) <= kPcm16Step);
    }
  }
  SUBCASE("manifest round trip") {
    const Manifest back = read_manifest(a / "manifest.jsonl");
    REQUIRE(back.records.size() == m.records.size());
    for (std::size_t i = 0; i < m.records.size(); ++i) {
      CHECK(back.records[i].id == m.records[i].id);
      CHECK(back.records[i].snr_db == m.records[i].snr_db);
      CHECK(back.records[i].mixture == m.records[i].mixture);
    }
  }
  SUBCASE("different seeds differ") {
    const auto c = fresh_dir("corpus_c");
    const Manifest other = synthesize_corpus(small_spec(Domain::Ood, 22), c);
    CHECK(slurp(a / m.records[0].mixture) != slurp(c / other.records[0].mixture));
  }
}

TEST_CASE("in-domain training records are unlabeled") {
  const auto dir = fresh_dir("indomain");
  const Manifest m = synthesize_corpus(small_spec(Domain::InDomain, 5), dir);
  for (const auto& r : m.split(Split::Train)) {
    CHECK_FALSE(r.speech.has_value());
    CHECK_FALSE(r.noise.has_value());
    CHECK(r.noise_kind == NoiseKind::Pink);
  }
  for (const auto& r : m.split(Split::Eval)) CHECK(r.labeled());
  const std::string text = slurp(dir / "manifest.jsonl");
  std::size_t line_start = 0;
  while (line_start < text.size()) {
    const std::size_t end = text.find('\n', line_start);
    const std::string line = text.substr(line_start, end - line_start);
    if (line.find("\"train\"") != std::string::npos) CHECK(line.find("speech") == std::string::npos);
    line_start = end + 1;
  }
  std::size_t wavs = 0;
  for (const auto& e : fs::directory_iterator(dir / "train")) {
    CHECK(e.path().filename().string().find("_mix.wav") != std::string::npos);
    ++wavs;
  }
  CHECK(wavs == 6);
}

TEST_CASE("manifest violations are rejected") {
  const auto dir = fresh_dir("violations");
  auto write = [&](const std::string& line) {
    std::ofstream out(dir / "manifest.jsonl", std::ios::trunc);
    out << line << '\n';
  };
  write(R"({"domain":"indomain","id":"x","mixture":"m.wav","speech":"s.wav","noise":"n.wav","noise_kind":"pink","schema_version":1,"snr_db":1.0,"split":"train"})");
  CHECK_THROWS(read_manifest(dir / "manifest.jsonl"));
  write(R"({"domain":"ood","id":"x","mixture":"m.wav","noise_kind":"white","schema_version":99,"snr_db":1.0,"split":"train"})");
  CHECK_THROWS(read_manifest(dir / "manifest.jsonl"));
  write("{not json");
  CHECK_THROWS(read_manifest(dir / "manifest.jsonl"));
  CHECK_THROWS_AS(read_manifest(dir / "absent.jsonl"), IoError);

  ManifestRecord r;
  r.id = "x";
  r.mixture = "m.wav";
  r.speech = "s.wav";
  CHECK_THROWS_AS(validate_record(r), ValidationError);
}

TEST_CASE("domain defaults shift both the noise spectrum and the SNR distribution") {
  const CorpusSpec ood = CorpusSpec::defaults(Domain::Ood);
  const CorpusSpec ind = CorpusSpec::defaults(Domain::InDomain);
  CHECK(ood.noise_kind == NoiseKind::White);
  CHECK(ind.noise_kind == NoiseKind::Pink);
  CHECK(ind.snr_mean_db == 5.0);
  CHECK(ind.snr_std_db == 7.0);
  CHECK(ood.snr_mean_db != ind.snr_mean_db);
  CHECK(ood.snr_std_db != ind.snr_std_db);
}
