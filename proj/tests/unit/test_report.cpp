#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "re2re/config_io.hpp"
#include "re2re/error.hpp"
#include "re2re/report.hpp"

using namespace re2re;
using nlohmann::json;

namespace {

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

MetricsReport sample_report() {
  MetricsReport r;
  r.rows.push_back(summarize("pretrained", "pink:all", {4.0, 5.0, 6.0}));
  r.rows.push_back(summarize("re2re", "pink:all", {7.25}));
  r.rows.push_back(summarize("re2re", "pink:snr<0", {-0.001, 0.001}));
  return r;
}

}  // namespace

TEST_CASE("sample_std") {
  CHECK_FALSE(sample_std({}).has_value());
  CHECK_FALSE(sample_std({3.0}).has_value());
  CHECK(*sample_std({1.0, 3.0}) == doctest::Approx(std::sqrt(2.0)));
  CHECK(*sample_std({2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0}) == doctest::Approx(std::sqrt(32.0 / 7.0)));
  CHECK(*sample_std({5.0, 5.0, 5.0}) == 0.0);
}

TEST_CASE("summarize") {
  const auto r = summarize("m", "c", {1.0, 2.0, 6.0});
  CHECK(r.mean == 3.0);
  CHECK(r.n == 3);
  CHECK(*r.std == doctest::Approx(std::sqrt(7.0)));
  const auto perfect = summarize("m", "c", {1.0, std::numeric_limits<double>::infinity()});
  CHECK(std::isinf(perfect.mean));
  CHECK_FALSE(perfect.std.has_value());
  CHECK_THROWS_AS(summarize("m", "c", {}), ValidationError);
}

TEST_CASE("csv layout") {
  const auto csv = lines(sample_report().to_csv());
  REQUIRE(csv.size() == 4);
  CHECK(csv[0] == "method,condition,metric,mean,std,n");
  CHECK(csv[1] == "pretrained,pink:all,si_sdr_db,5.000000,1.000000,3");
  CHECK(csv[2] == "re2re,pink:all,si_sdr_db,7.250000,,1");
  CHECK(csv[3] == "re2re,pink:snr<0,si_sdr_db,0.000000,0.001414,2");

  MetricsReport odd;
  odd.rows.push_back(summarize("a,b", "x\"y", {1.0}));
  CHECK(lines(odd.to_csv())[1] == "\"a,b\",\"x\"\"y\",si_sdr_db,1.000000,,1");
}

TEST_CASE("table agrees with the csv") {
  const MetricsReport r = sample_report();
  const auto table = lines(r.to_table());
  REQUIRE(table.size() == 5);
  CHECK(table[0].find("SI-SDR [dB]") != std::string::npos);
  CHECK(table[2].find("5.00 +- 1.00") != std::string::npos);
  CHECK(table[3].find("7.25") != std::string::npos);
  CHECK(table[3].find("+-") == std::string::npos);
  CHECK(table[4].find("-0.00") == std::string::npos);
  CHECK(format_db(-0.001) == "0.00");
  CHECK(format_db(-1.005) == "-1.00");
  CHECK(format_db(std::numeric_limits<double>::infinity()) == "inf");
}

TEST_CASE("find and append") {
  MetricsReport r = sample_report();
  CHECK(r.find("re2re", "pink:all")->mean == 7.25);
  CHECK(r.find("remixit", "pink:all") == nullptr);
  r.append(sample_report());
  CHECK(r.rows.size() == 6);
}

TEST_CASE("train config json round trip") {
  TrainConfig c;
  c.mode = Mode::Re2ReReg;
  c.gamma = 0.25;
  c.wma_cadence = WmaCadence::Step;
  c.wma_every = 7;
  c.loss.beta = 3.5;
  c.loss.remixit_metric = Metric::Mse;
  c.loss.si_sdr.zero_mean = true;
  c.model.num_filters = 12;
  c.model.mask_mode = MaskMode::Free;
  c.strategy = PairStrategy::Independent;
  c.seed = 123456789012345ULL;
  c.fresh_optimizer = false;
  c.adam.beta2 = 0.98;
  CHECK(train_config_from_json(to_json(c)) == c);
  CHECK(train_config_from_json(json::parse(to_json(c).dump())) == c);
  CHECK(train_config_from_json(json::object()) == TrainConfig{});
}

TEST_CASE("other configs round trip") {
  SeparatorConfig s = SeparatorConfig::full_scale();
  CHECK(separator_config_from_json(to_json(s)) == s);
  LossConfig l;
  l.beta = 0.0;
  CHECK(loss_config_from_json(to_json(l)) == l);
  CorpusSpec spec = CorpusSpec::defaults(Domain::InDomain);
  spec.num_train = 3;
  spec.snr_std_db = 0.0;
  CHECK(corpus_spec_from_json(to_json(spec)) == spec);
  // Domain defaults apply before explicit fields.
  CHECK(corpus_spec_from_json(json{{"domain", "indomain"}}).noise_kind == NoiseKind::Pink);
  CHECK(corpus_spec_from_json(json{{"domain", "indomain"}, {"noise_kind", "bandpassed"}}).noise_kind ==
        NoiseKind::Bandpassed);
}

TEST_CASE("config readers are strict") {
  CHECK_THROWS_WITH_AS(train_config_from_json(json{{"gama", 0.1}}), doctest::Contains("gama"), ValidationError);
  CHECK_THROWS_WITH_AS(train_config_from_json(json{{"gamma", "high"}}), doctest::Contains("gamma"), ValidationError);
  CHECK_THROWS_WITH_AS(train_config_from_json(json{{"gamma", 2.0}}), doctest::Contains("gamma"), ValidationError);
  CHECK_THROWS_WITH_AS(train_config_from_json(json{{"model", {{"filters", 8}}}}), doctest::Contains("filters"),
                       ValidationError);
  CHECK_THROWS_WITH_AS(train_config_from_json(json{{"loss", {{"beta", -1.0}}}}), doctest::Contains("beta"),
                       ValidationError);
  CHECK_THROWS_WITH_AS(train_config_from_json(json{{"batch_size", -3}}), doctest::Contains("batch_size"),
                       ValidationError);
  CHECK_THROWS_WITH_AS(train_config_from_json(json{{"mode", "mixit"}}), doctest::Contains("mixit"),
                       ValidationError);
  CHECK_THROWS_AS(train_config_from_json(json::array()), ValidationError);
  CHECK_THROWS_WITH_AS(corpus_spec_from_json(json{{"noise_kind", "brown"}}), doctest::Contains("brown"),
                       ValidationError);
}

TEST_CASE("read_json_file") {
  const auto dir = std::filesystem::temp_directory_path() / "re2re_test_report";
  std::filesystem::create_directories(dir);
  {
    std::ofstream(dir / "ok.json") << R"({"epochs": 3})";
    std::ofstream(dir / "bad.json") << R"({"epochs": )";
  }
  CHECK(train_config_from_json(read_json_file(dir / "ok.json")).epochs == 3);
  CHECK_THROWS_AS(read_json_file(dir / "bad.json"), ValidationError);
  CHECK_THROWS_AS(read_json_file(dir / "nope.json"), IoError);
}
