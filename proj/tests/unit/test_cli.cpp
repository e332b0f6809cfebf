#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

const fs::path& work_dir() {
  static const fs::path dir = [] {
    auto d = fs::temp_directory_path() / "re2re_test_cli";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

struct Result {
  int code = -1;
  std::string output;
};

Result run(const std::string& args) {
  const fs::path log = work_dir() / "last_output.txt";
  const std::string cmd = std::string("\"") + RE2RE_CLI_PATH + "\" " + args + " > \"" + log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  Result r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(log);
  std::stringstream ss;
  ss << in.rdbuf();
  r.output = ss.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::string path(const std::string& rel) { return (work_dir() / rel).string(); }

const std::string kTiny = " --filters 4 --taps 5 --hop 2 --blocks 1 --batch 3 --epochs 1 ";

void make_corpora() {
  static bool done = false;
  if (done) return;
  const std::string common = " --num-train 6 --num-eval 3 --chunk-seconds 0.1";
  REQUIRE(run("generate --domain ood --seed 1 --out " + path("ood") + common).code == 0);
  REQUIRE(run("generate --domain indomain --seed 2 --out " + path("ind") + common).code == 0);
  done = true;
}

}  // namespace

TEST_CASE("help and parse errors") {
  CHECK(run("--help").code == 0);
  CHECK(run("").code == 1);
  CHECK(run("pretrain --epochs 3").code == 1);  // --data and --out missing
  CHECK(run("frobnicate").code == 1);
}

TEST_CASE("generate, pretrain, adapt, evaluate") {
  make_corpora();
  CHECK(fs::exists(path("ood/manifest.jsonl")));

  const auto pre = run("pretrain --data " + path("ood/manifest.jsonl") + " --out " + path("run") + kTiny + "--seed 5");
  REQUIRE_MESSAGE(pre.code == 0, pre.output);
  CHECK(fs::exists(path("run/pretrained.ckpt")));
  CHECK(slurp(path("run/pretrain_config.json")).find("\"seed\": 5") != std::string::npos);

  const auto ada = run("adapt --data " + path("ind/manifest.jsonl") + " --checkpoint " + path("run/pretrained.ckpt") +
                       " --out " + path("run") + kTiny + "--mode re2re_reg --beta 2");
  REQUIRE_MESSAGE(ada.code == 0, ada.output);
  CHECK(fs::exists(path("run/re2re_reg.ckpt")));
  CHECK(slurp(path("run/re2re_reg_loss.csv")).rfind("step,loss\n", 0) == 0);

  const auto ev = run("evaluate --data " + path("ind/manifest.jsonl") + " --checkpoint " +
                      path("run/re2re_reg.ckpt") + " --method adapted --out " + path("ev"));
  REQUIRE_MESSAGE(ev.code == 0, ev.output);
  const std::string csv = slurp(path("ev/metrics.csv"));
  CHECK(csv.rfind("method,condition,metric,mean,std,n\n", 0) == 0);
  CHECK(csv.find("adapted,pink:all,si_sdr_db,") != std::string::npos);
  CHECK(ev.output.find("adapted") != std::string::npos);

  SUBCASE("outputs are reproducible and carry no timestamps") {
    const std::string first = slurp(path("run/pretrained.ckpt"));
    REQUIRE(run("pretrain --data " + path("ood/manifest.jsonl") + " --out " + path("run") + kTiny + "--seed 5").code ==
            0);
    CHECK(slurp(path("run/pretrained.ckpt")) == first);
    REQUIRE(run("evaluate --data " + path("ind/manifest.jsonl") + " --checkpoint " + path("run/re2re_reg.ckpt") +
                " --method adapted --out " + path("ev") + " --loader-threads 3")
                .code == 0);
    CHECK(slurp(path("ev/metrics.csv")) == csv);
  }
  SUBCASE("seed override changes the model") {
    REQUIRE(run("pretrain --data " + path("ood/manifest.jsonl") + " --out " + path("run6") + kTiny + "--seed 6")
                .code == 0);
    CHECK(slurp(path("run6/pretrained.ckpt")) != slurp(path("run/pretrained.ckpt")));
  }
}

TEST_CASE("identity baseline") {
  make_corpora();
  const auto r = run("evaluate --identity --data " + path("ind/manifest.jsonl") + " --out " + path("ev_id"));
  REQUIRE_MESSAGE(r.code == 0, r.output);
  CHECK(slurp(path("ev_id/metrics.csv")).find("input,pink:all") != std::string::npos);
}

TEST_CASE("validation errors exit 1 and name the field") {
  make_corpora();
  auto r = run("pretrain --data " + path("ood/manifest.jsonl") + " --out " + path("bad") + kTiny + "--gamma 3");
  CHECK(r.code == 1);
  CHECK(r.output.find("gamma") != std::string::npos);

  r = run("adapt --data " + path("ind/manifest.jsonl") + " --checkpoint x --out " + path("bad") + " --batch 1");
  CHECK(r.code == 1);
  CHECK(r.output.find("batch_size") != std::string::npos);

  std::ofstream(path("typo.json")) << R"({"epochz": 2})";
  r = run("pretrain --config " + path("typo.json") + " --data " + path("ood/manifest.jsonl") + " --out " +
          path("bad"));
  CHECK(r.code == 1);
  CHECK(r.output.find("epochz") != std::string::npos);

  r = run("adapt --data " + path("ind/manifest.jsonl") + " --checkpoint x --out " + path("bad") + " --mode mixit");
  CHECK(r.code == 1);
  CHECK(r.output.find("mixit") != std::string::npos);
}

TEST_CASE("unlabeled in-domain data cannot be used for pretraining") {
  make_corpora();
  const auto r = run("pretrain --data " + path("ind/manifest.jsonl") + " --out " + path("bad") + kTiny);
  CHECK(r.code == 1);
}

TEST_CASE("I/O errors exit 2") {
  make_corpora();
  auto r = run("evaluate --data " + path("nowhere/manifest.jsonl") + " --identity --out " + path("bad"));
  CHECK(r.code == 2);
  r = run("adapt --data " + path("ind/manifest.jsonl") + " --checkpoint " + path("missing.ckpt") + " --out " +
          path("bad") + kTiny);
  CHECK(r.code == 2);
  CHECK(r.output.find("missing.ckpt") != std::string::npos);
}

TEST_CASE("verify") {
  auto r = run("verify --gradient-points 2");
  CHECK_MESSAGE(r.code == 0, r.output);
  CHECK(r.output.find("PASS") != std::string::npos);
  CHECK(r.output.find("FAIL") == std::string::npos);

  r = run("verify --gradient-points 2 --fault-op softmax_sources");
  CHECK(r.code == 3);
  CHECK(r.output.find("FAIL") != std::string::npos);
  CHECK(r.output.find("softmax_sources") != std::string::npos);

  CHECK(run("verify --fault-op no_such_op").code == 1);
}
