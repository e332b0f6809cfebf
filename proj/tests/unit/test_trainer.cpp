#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <set>

#include "re2re/error.hpp"
#include "re2re/trainer.hpp"
#include "test_util.hpp"

using namespace re2re;

namespace {

SeparatorConfig tiny_model() {
  SeparatorConfig c;
  c.num_filters = 6;
  c.kernel_taps = 5;
  c.hop = 2;
  c.num_blocks = 1;
  return c;
}

TrainConfig tiny_config(Mode mode) {
  TrainConfig c;
  c.mode = mode;
  c.model = tiny_model();
  c.batch_size = 4;
  c.epochs = 2;
  c.lr = 1e-2;
  c.seed = 3;
  return c;
}

// Labeled in-memory corpus built straight from the generators.
Dataset make_dataset(NoiseKind kind, std::size_t count, std::uint64_t seed, double snr = 5.0) {
  CorpusSpec spec;
  spec.chunk_seconds = 0.1;  // 800 samples
  Dataset d;
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng = make_rng(seed, i);
    Utterance u;
    u.id = "u" + std::to_string(i);
    u.noise_kind = kind;
    auto s = gen_speechlike(spec, rng);
    auto n = gen_noise(kind, spec, rng);
    double ps = 0.0, pn = 0.0;
    for (std::size_t t = 0; t < s.size(); ++t) {
      ps += s[t] * s[t];
      pn += n[t] * n[t];
    }
    const double g = std::sqrt(ps / pn / std::pow(10.0, snr / 10.0));
    for (double& v : n) v *= g;
    u.snr_db = snr;
    u.mixture.resize(s.size());
    for (std::size_t t = 0; t < s.size(); ++t) u.mixture[t] = s[t] + n[t];
    u.speech = std::move(s);
    u.noise = std::move(n);
    d.items.push_back(std::move(u));
  }
  return d;
}

Dataset unlabeled(Dataset d) {
  for (auto& u : d.items) {
    u.speech.reset();
    u.noise.reset();
  }
  return d;
}

double mean_si_sdr(const ParamVector& params, const Dataset& data) {
  const auto report = evaluate(model_estimator(params), data, "m");
  return report.rows.front().mean;
}

}  // namespace

TEST_CASE("mode names and config validation") {
  for (Mode m : {Mode::Supervised, Mode::RemixIT, Mode::Re2Re, Mode::Re2ReReg})
    CHECK(mode_from_name(mode_name(m)) == m);
  CHECK_THROWS_AS(mode_from_name("mixit"), ValidationError);

  TrainConfig c;
  CHECK_NOTHROW(c.validate());
  CHECK(c.batch_size == 24);
  CHECK(c.gamma == 0.01);
  CHECK(c.loss.beta == 100.0);
  CHECK(c.wma_every == 1);

  c.batch_size = 1;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c.mode = Mode::Supervised;
  CHECK_NOTHROW(c.validate());
  c = TrainConfig{};
  c.gamma = 1.5;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = TrainConfig{};
  c.epochs = 0;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = TrainConfig{};
  c.loss.beta = -1.0;
  CHECK_THROWS_AS(c.validate(), ValidationError);
}

TEST_CASE("epoch_batches") {
  Rng rng(1);
  const auto batches = epoch_batches(10, 4, 1, rng);
  REQUIRE(batches.size() == 3);
  std::multiset<std::size_t> seen;
  for (const auto& b : batches) seen.insert(b.begin(), b.end());
  CHECK(seen.size() == 10);
  CHECK(std::set<std::size_t>(seen.begin(), seen.end()).size() == 10);
  CHECK(batches.back().size() == 2);
  CHECK(epoch_batches(10, 4, 3, rng).size() == 2);
  CHECK(epoch_batches(9, 4, 2, rng).size() == 2);
  Rng a(2), b(2);
  CHECK(epoch_batches(30, 7, 1, a) == epoch_batches(30, 7, 1, b));
}

TEST_CASE("Adam matches a hand-computed first step") {
  const ParamVector p(tiny_model(), std::vector<double>(parameter_count(tiny_model()), 1.0));
  Adam adam(p.size(), 0.1);
  std::vector<double> g(p.size(), 0.0);
  g[0] = 2.0;
  g[1] = -0.5;
  const ParamVector q = adam.step(p, g);
  // First bias-corrected step moves by lr * g / (|g| + eps').
  CHECK(q[0] == doctest::Approx(0.9).epsilon(1e-7));
  CHECK(q[1] == doctest::Approx(1.1).epsilon(1e-7));
  CHECK(q[2] == 1.0);
  CHECK(adam.moments().steps == 1);
  CHECK_THROWS_AS(adam.step(p, std::vector<double>(3)), ValidationError);
}

TEST_CASE("pretraining is deterministic and lowers the training error") {
  const Dataset train = make_dataset(NoiseKind::White, 8, 1);
  TrainConfig cfg = tiny_config(Mode::Supervised);
  cfg.epochs = 25;
  const Checkpoint a = pretrain_supervised(cfg, train);
  const Checkpoint b = pretrain_supervised(cfg, train);
  CHECK(a == b);
  cfg.seed = 4;
  CHECK_FALSE(pretrain_supervised(cfg, train).params == a.params);

  Rng init = make_rng(3, 1);
  const ParamVector start = init_params(tiny_model(), init);
  CHECK(mean_si_sdr(a.params, train) > mean_si_sdr(start, train) + 1.0);
  CHECK(a.optimizer.has_value());
  CHECK_THROWS_AS(pretrain_supervised(cfg, unlabeled(train)), ValidationError);
}

TEST_CASE("adaptation bookkeeping") {
  const Dataset ood = make_dataset(NoiseKind::White, 8, 1);
  const Dataset ind = unlabeled(make_dataset(NoiseKind::Pink, 9, 2));
  TrainConfig pre = tiny_config(Mode::Supervised);
  pre.epochs = 3;
  const Checkpoint ck = pretrain_supervised(pre, ood);

  SUBCASE("teacher and student start from the checkpoint") {
    const TrainState s = init_adaptation(tiny_config(Mode::Re2Re), ck);
    CHECK(s.teacher == ck.params);
    CHECK(s.student == ck.params);
    CHECK(s.optimizer.moments().steps == 0);
    TrainConfig keep = tiny_config(Mode::Re2Re);
    keep.fresh_optimizer = false;
    CHECK(init_adaptation(keep, ck).optimizer.moments() == *ck.optimizer);
    CHECK_THROWS_AS(init_adaptation(tiny_config(Mode::Supervised), ck), ValidationError);
  }
  SUBCASE("gamma 0 freezes the teacher") {
    TrainConfig cfg = tiny_config(Mode::RemixIT);
    cfg.gamma = 0.0;
    cfg.epochs = 3;
    const TrainState s = adapt(cfg, ck, ind);
    CHECK(s.teacher == ck.params);
    CHECK_FALSE(s.student == ck.params);
    CHECK(s.wma_events == 3);
  }
  SUBCASE("the teacher moves only at WMA events") {
    TrainConfig cfg = tiny_config(Mode::Re2Re);
    cfg.gamma = 0.3;
    cfg.wma_every = 2;
    TrainState s = init_adaptation(cfg, ck);
    for (int e = 1; e <= 4; ++e) {
      const ParamVector before = s.teacher;
      adapt_epoch(s, cfg, ind);
      CHECK(s.loss_history.size() == std::size_t(2 * e));  // 9 chunks -> batches 4, 4 (1 dropped)
      if (e % 2 == 0) CHECK(s.teacher == wma_update(before, s.student, 0.3));
      else CHECK(s.teacher == before);
    }
    CHECK(s.wma_events == 2);
  }
  SUBCASE("step cadence") {
    TrainConfig cfg = tiny_config(Mode::Re2Re);
    cfg.wma_cadence = WmaCadence::Step;
    cfg.wma_every = 3;
    TrainState s = init_adaptation(cfg, ck);
    for (int e = 0; e < 3; ++e) adapt_epoch(s, cfg, ind);
    CHECK(s.step == 6);
    CHECK(s.wma_events == 2);
  }
  SUBCASE("re2re_reg with beta 0 retraces remixit") {
    TrainConfig remix = tiny_config(Mode::RemixIT);
    TrainConfig reg = tiny_config(Mode::Re2ReReg);
    reg.loss.beta = 0.0;
    const TrainState a = adapt(remix, ck, ind);
    const TrainState b = adapt(reg, ck, ind);
    CHECK(a.student == b.student);
    CHECK(a.loss_history == b.loss_history);
  }
  SUBCASE("adaptation is deterministic per seed") {
    const TrainConfig cfg = tiny_config(Mode::Re2ReReg);
    const TrainState a = adapt(cfg, ck, ind);
    const TrainState b = adapt(cfg, ck, ind);
    CHECK(a.student == b.student);
    CHECK(a.teacher == b.teacher);
    CHECK(to_checkpoint(a, "x") == to_checkpoint(b, "x"));
    TrainConfig other = cfg;
    other.seed = 99;
    CHECK_FALSE(adapt(other, ck, ind).student == a.student);
  }
  SUBCASE("oracle teacher needs labels") {
    TrainConfig cfg = tiny_config(Mode::Re2Re);
    cfg.oracle_teacher = true;
    TrainState s = init_adaptation(cfg, ck);
    CHECK_THROWS_AS(adapt_epoch(s, cfg, ind), ValidationError);
  }
}

TEST_CASE("re2re with an oracle teacher improves in-domain SI-SDR within 10 epochs") {
  const Dataset ood = make_dataset(NoiseKind::White, 12, 1);
  const Dataset ind = make_dataset(NoiseKind::Pink, 12, 2);
  TrainConfig pre = tiny_config(Mode::Supervised);
  pre.epochs = 10;
  const Checkpoint ck = pretrain_supervised(pre, ood);
  TrainConfig cfg = tiny_config(Mode::Re2Re);
  cfg.oracle_teacher = true;
  cfg.epochs = 10;
  const TrainState s = adapt(cfg, ck, ind);
  CHECK(mean_si_sdr(s.student, ind) > mean_si_sdr(ck.params, ind));
}

TEST_CASE("evaluation") {
  const Dataset eval = make_dataset(NoiseKind::Pink, 6, 5);
  SUBCASE("identity scores the raw mixture") {
    const auto report = evaluate(identity_estimator(), eval, "input");
    const MetricsRow* all = report.find("input", "pink:all");
    REQUIRE(all != nullptr);
    double mean = 0.0;
    for (const auto& u : eval.items) mean += si_sdr(u.mixture, *u.speech) / 6.0;
    CHECK(all->mean == doctest::Approx(mean).epsilon(1e-12));
    CHECK(all->n == 6);
    CHECK(report.find("input", "pink:snr5-10") != nullptr);
    CHECK(report.find("input", "pink:snr5-10")->n == 6);
  }
  SUBCASE("a perfect estimator reports +inf") {
    std::size_t calls = 0;
    const Estimator oracle = [&](const SignalBatch& x) {
      for (const auto& u : eval.items)
        if (u.mixture == std::vector<double>(x.row(0).begin(), x.row(0).end())) {
          ++calls;
          return SignalBatch(1, u.speech->size(), *u.speech, Role::StudentSpeech);
        }
      throw ValidationError("unknown mixture");
    };
    const auto report = evaluate(oracle, eval, "oracle");
    CHECK(std::isinf(report.find("oracle", "pink:all")->mean));
  }
  SUBCASE("evaluation needs labels") {
    CHECK_THROWS_AS(evaluate(identity_estimator(), unlabeled(eval), "x"), ValidationError);
  }
  CHECK(snr_bucket(-0.1) == "snr<0");
  CHECK(snr_bucket(0.0) == "snr0-5");
  CHECK(snr_bucket(7.0) == "snr5-10");
  CHECK(snr_bucket(10.0) == "snr>=10");
}

TEST_CASE("trial aggregation") {
  MetricsReport a, b;
  a.rows.push_back({"re2re", "pink:all", "si_sdr_db", 1.0, std::nullopt, 1, {1}});
  b.rows.push_back({"re2re", "pink:all", "si_sdr_db", 3.0, std::nullopt, 1, {2}});
  const auto agg = aggregate_trials({a, b});
  REQUIRE(agg.rows.size() == 1);
  CHECK(agg.rows[0].mean == 2.0);
  CHECK(*agg.rows[0].std == doctest::Approx(std::sqrt(2.0)));
  CHECK(agg.rows[0].n == 2);
  CHECK(agg.rows[0].trial_seeds == std::vector<std::uint64_t>{1, 2});
}

TEST_CASE("trials are reproducible per seed") {
  const Dataset ood = make_dataset(NoiseKind::White, 8, 1);
  const Dataset ind_train = unlabeled(make_dataset(NoiseKind::Pink, 8, 2));
  const Dataset ind_eval = make_dataset(NoiseKind::Pink, 4, 3);
  TrialPlan plan;
  plan.pretrain = tiny_config(Mode::Supervised);
  plan.adapt = tiny_config(Mode::Re2Re);
  plan.adapt.epochs = 1;
  plan.num_trials = 2;
  plan.base_seed = 10;

  const auto one = run_trial(plan, 10, ood, ind_train, ind_eval);
  CHECK(one.to_csv() == run_trial(plan, 10, ood, ind_train, ind_eval).to_csv());
  for (const char* m : {"input", "pretrained", "remixit", "re2re", "re2re_reg"})
    CHECK(one.find(m, "pink:all") != nullptr);

  const auto many = multi_trial(plan, ood, ind_train, ind_eval);
  const MetricsRow* row = many.find("re2re", "pink:all");
  REQUIRE(row != nullptr);
  CHECK(row->n == 2);
  CHECK(row->std.has_value());
  CHECK(row->trial_seeds == std::vector<std::uint64_t>{10, 11});
  CHECK(many.find("input", "pink:all")->std.value() == 0.0);

  plan.num_trials = 1;
  CHECK_THROWS_AS(multi_trial(plan, ood, ind_train, ind_eval), ValidationError);
}

TEST_CASE("dataset loading") {
  const auto dir = std::filesystem::temp_directory_path() / "re2re_test_trainer" / "corpus";
  std::filesystem::remove_all(dir);
  CorpusSpec spec = CorpusSpec::defaults(Domain::InDomain);
  spec.num_train = 7;
  spec.num_eval = 5;
  spec.chunk_seconds = 0.1;
  spec.seed = 8;
  const Manifest m = synthesize_corpus(spec, dir);

  const Dataset one = load_dataset(m, Split::Train, false, 1);
  const Dataset four = load_dataset(m, Split::Train, false, 4);
  REQUIRE(one.size() == 7);
  CHECK_FALSE(one.labeled());
  for (std::size_t i = 0; i < 7; ++i) {
    CHECK(one.items[i].id == four.items[i].id);
    CHECK(one.items[i].mixture == four.items[i].mixture);
  }
  CHECK_THROWS_AS(load_dataset(m, Split::Train, true), ValidationError);
  const Dataset eval = load_dataset(m, Split::Eval, true, 3);
  CHECK(eval.labeled());
  CHECK(eval.length() == 800);

  const SignalBatch batch = gather(eval, {4, 0}, Role::Speech);
  CHECK(batch.rows() == 2);
  CHECK(std::vector<double>(batch.row(0).begin(), batch.row(0).end()) == *eval.items[4].speech);
  CHECK_THROWS_AS(gather(one, {0}, Role::Speech), ValidationError);
}
