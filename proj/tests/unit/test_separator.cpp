#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "re2re/checkpoint.hpp"
#include "re2re/error.hpp"
#include "re2re/remixer.hpp"
#include "re2re/separator.hpp"
#include "test_util.hpp"

using namespace re2re;

namespace {

SeparatorConfig tiny(MaskMode mode = MaskMode::SoftmaxConsistent) {
  SeparatorConfig c;
  c.num_filters = 6;
  c.kernel_taps = 5;
  c.hop = 2;
  c.num_blocks = 2;
  c.mask_mode = mode;
  return c;
}

std::filesystem::path temp_file(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "re2re_test_separator";
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("config validation and names") {
  CHECK_NOTHROW(SeparatorConfig{}.validate());
  SeparatorConfig c = tiny();
  c.num_filters = 1;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = tiny();
  c.hop = 0;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  CHECK(mask_mode_from_name(mask_mode_name(MaskMode::Free)) == MaskMode::Free);
  CHECK_THROWS_AS(mask_mode_from_name("sigmoid"), ValidationError);

  const auto full = SeparatorConfig::full_scale();
  CHECK(full.num_filters == 512);
  CHECK(full.kernel_taps == 41);
  CHECK(full.hop == 20);
  CHECK(full.num_blocks == 8);
  CHECK_NOTHROW(full.validate());
}

TEST_CASE("parameter count matches the layout") {
  for (const SeparatorConfig& c : {tiny(), SeparatorConfig{}, SeparatorConfig::full_scale()}) {
    const auto layout = param_layout(c);
    std::size_t offset = 0;
    for (const auto& seg : layout) {
      CHECK(seg.offset == offset);
      offset += numel(seg.shape);
    }
    CHECK(offset == parameter_count(c));
    const std::size_t f = c.num_filters, k = c.kernel_taps;
    CHECK(parameter_count(c) == 2 * f * k + c.num_blocks * (f * f + f + 1) + 2 * (f * f + f));
  }
  // Desk default: F=16, K=81, 2 blocks.
  CHECK(parameter_count(SeparatorConfig{}) == 2 * 16 * 81 + 2 * (16 * 16 + 16 + 1) + 2 * (16 * 16 + 16));
}

TEST_CASE("init is deterministic in the seed and respects fan-in bounds") {
  Rng a(11), b(11), c(12);
  const auto pa = init_params(tiny(), a);
  CHECK(pa == init_params(tiny(), b));
  CHECK_FALSE(pa == init_params(tiny(), c));
  for (const auto& seg : param_layout(tiny())) {
    for (std::size_t i = 0; i < numel(seg.shape); ++i) {
      const double v = pa[seg.offset + i];
      if (seg.name.ends_with(".slope")) CHECK(v == kInitialSlope);
      else CHECK(std::abs(v) <= 1.0 / std::sqrt(double(seg.fan_in)));
    }
  }
  CHECK_THROWS_AS(ParamVector(tiny(), std::vector<double>(3)), ValidationError);
}

TEST_CASE("padded_length and reflect_pad") {
  CHECK(padded_length(10, 5, 1) == 10);
  CHECK(padded_length(10, 5, 2) == 11);
  CHECK(padded_length(3, 5, 2) == 5);
  CHECK(padded_length(8000, 21, 10) == 8001);
  for (std::size_t t = 1; t < 40; ++t)
    for (std::size_t k : {1, 3, 5})
      for (std::size_t h : {1, 2, 3}) {
        const std::size_t p = padded_length(t, k, h);
        CHECK(p >= t);
        CHECK(p >= k);
        CHECK((p - k) % h == 0);
        CHECK(p < std::max(t, k) + h);
      }
  const Tensor x({1, 4}, {1, 2, 3, 4});
  CHECK(reflect_pad(x, 7).values() == std::vector<double>{1, 2, 3, 4, 3, 2, 1});
  CHECK(reflect_pad(x, 9).values() == std::vector<double>{1, 2, 3, 4, 3, 2, 1, 2, 3});
  CHECK(reflect_pad(Tensor({1, 1}, {5}), 3).values() == std::vector<double>{5, 5, 5});
  CHECK_THROWS_AS(reflect_pad(x, 3), ValidationError);
}

TEST_CASE("softmax-consistent outputs add back to the mixture") {
  Rng rng(1);
  const auto params = init_params(tiny(), rng);
  for (std::size_t length : {5, 17, 64}) {
    const auto x = test::random_batch(3, length, rng, 0.3);
    const auto [s, n] = separate(params, x);
    CHECK(s.rows() == 3);
    CHECK(s.length() == length);
    CHECK(s.role() == Role::StudentSpeech);
    double worst = 0.0;
    for (std::size_t i = 0; i < x.samples().size(); ++i)
      worst = std::max(worst, std::abs(s.samples()[i] + n.samples()[i] - x.samples()[i]));
    CHECK(worst <= 1e-12);
  }
}

TEST_CASE("zero input gives zero output") {
  Rng rng(2);
  for (MaskMode mode : {MaskMode::SoftmaxConsistent, MaskMode::Free}) {
    const auto params = init_params(tiny(mode), rng);
    const SignalBatch zero(2, 20, std::vector<double>(40, 0.0));
    const auto [s, n] = separate(params, zero);
    for (double v : s.samples()) CHECK(v == 0.0);
    for (double v : n.samples()) CHECK(v == 0.0);
  }
}

TEST_CASE("rows are processed independently") {
  Rng rng(3);
  const auto params = init_params(tiny(), rng);
  const auto x = test::random_batch(4, 30, rng, 0.5);
  const auto [s, n] = separate(params, x);
  const Permutation p({3, 1, 0, 2});
  const auto [sp, np] = separate(params, apply(p, x));
  CHECK(test::max_abs_diff(sp.samples(), apply(p, s).samples()) == 0.0);
  CHECK(test::max_abs_diff(np.samples(), apply(p, n).samples()) == 0.0);

  const SignalBatch one = SignalBatch::from_rows({{x.row(2).begin(), x.row(2).end()}});
  const auto [s1, n1] = separate(params, one);
  CHECK(test::max_abs_diff(s1.row(0), s.row(2)) <= 1e-14);
}

TEST_CASE("free mask mode is not forced to be consistent") {
  Rng rng(4);
  const auto params = init_params(tiny(MaskMode::Free), rng);
  const auto x = test::random_batch(2, 32, rng, 0.5);
  const auto [s, n] = separate(params, x);
  double gap = 0.0;
  for (std::size_t i = 0; i < x.samples().size(); ++i)
    gap = std::max(gap, std::abs(s.samples()[i] + n.samples()[i] - x.samples()[i]));
  CHECK(gap > 1e-6);
}

TEST_CASE("forward rejects bad shapes") {
  Rng rng(5);
  const auto params = init_params(tiny(), rng);
  diff::Tape tape;
  auto x = tape.constant(Tensor({2, 10}));
  CHECK_THROWS_AS(forward(tiny(), x, tape.constant(Tensor({params.size() + 1}))), ValidationError);
  CHECK_THROWS_AS(forward(tiny(), tape.constant(Tensor({10})), tape.constant(Tensor({params.size()}))),
                  ValidationError);
}

TEST_CASE("wma_update") {
  const SeparatorConfig c = tiny();
  const std::size_t n = parameter_count(c);
  const ParamVector teacher(c, std::vector<double>(n, 1.0));
  const ParamVector student(c, std::vector<double>(n, 3.0));
  CHECK(wma_update(teacher, student, 0.0) == teacher);
  CHECK(wma_update(teacher, student, 1.0) == student);
  const auto half = wma_update(teacher, student, 0.25);
  for (double v : half.values()) CHECK(v == doctest::Approx(1.5));
  CHECK_THROWS_AS(wma_update(teacher, student, 1.5), ValidationError);
  SeparatorConfig other = c;
  other.num_filters = 7;
  Rng rng(6);
  CHECK_THROWS_AS(wma_update(teacher, init_params(other, rng), 0.5), ValidationError);
}

TEST_CASE("wma contracts the teacher-student distance by 1 - gamma") {
  Rng rng(7);
  const auto t = init_params(tiny(), rng);
  const auto s = init_params(tiny(), rng);
  auto dist = [](const ParamVector& a, const ParamVector& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(d);
  };
  for (double gamma : {0.01, 0.3, 0.9}) {
    const auto u = wma_update(t, s, gamma);
    CHECK(dist(u, s) == doctest::Approx((1.0 - gamma) * dist(t, s)).epsilon(1e-12));
  }
}

TEST_CASE("checkpoint round trip") {
  Rng rng(8);
  Checkpoint ck;
  ck.params = init_params(tiny(), rng);
  ck.label = "unit";
  ck.optimizer = AdamMoments{test::uniform(ck.params.size(), rng), test::uniform(ck.params.size(), rng, 0, 1), 17};
  ck.rng_state = serialize_rng(rng);
  const auto path = temp_file("round.ckpt");
  save_checkpoint(path, ck);
  const Checkpoint back = load_checkpoint(path);
  CHECK(back == ck);
  CHECK(back.params.config() == ck.params.config());
  Rng restored = deserialize_rng(back.rng_state);
  CHECK(restored() == rng());

  ck.optimizer.reset();
  save_checkpoint(path, ck);
  CHECK_FALSE(load_checkpoint(path).optimizer.has_value());
}

TEST_CASE("corrupt checkpoints are rejected") {
  Rng rng(9);
  Checkpoint ck;
  ck.params = init_params(tiny(), rng);
  ck.rng_state = serialize_rng(rng);
  const auto path = temp_file("bad.ckpt");
  save_checkpoint(path, ck);

  std::string bytes;
  {
    std::ifstream in(path, std::ios::binary);
    bytes.assign(std::istreambuf_iterator<char>(in), {});
  }
  auto write = [&](const std::string& b) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << b;
  };

  write(bytes.substr(0, bytes.size() - 8));
  CHECK_THROWS_AS(load_checkpoint(path), IoError);

  std::string wrong_version = bytes;
  wrong_version[8] = static_cast<char>(kCheckpointVersion + 1);
  write(wrong_version);
  CHECK_THROWS_WITH_AS(load_checkpoint(path), doctest::Contains("version"), ValidationError);

  std::string wrong_magic = bytes;
  wrong_magic[0] = 'X';
  write(wrong_magic);
  CHECK_THROWS_AS(load_checkpoint(path), IoError);

  CHECK_THROWS_AS(load_checkpoint(temp_file("missing.ckpt")), IoError);
}
