// re2re: corpus generation, training, evaluation and the property suite.

#include <CLI11.hpp>

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "re2re/checkpoint.hpp"
#include "re2re/config_io.hpp"
#include "re2re/error.hpp"
#include "re2re/kernels.hpp"
#include "re2re/report.hpp"
#include "re2re/synthdata.hpp"
#include "re2re/trainer.hpp"
#include "re2re/verify.hpp"

namespace fs = std::filesystem;
using namespace re2re;

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitIo = 2;
constexpr int kExitPropertyFailure = 3;

// Flags that override TrainConfig fields; unset flags leave the config alone.
struct TrainOverrides {
  std::optional<std::string> mode;
  std::optional<std::size_t> batch;
  std::optional<std::size_t> epochs;
  std::optional<double> gamma;
  std::optional<std::size_t> wma_every;
  std::optional<std::string> wma_cadence;
  std::optional<double> lr;
  std::optional<std::uint64_t> seed;
  std::optional<double> beta;
  std::optional<std::string> strategy;
  std::optional<std::string> supervised_metric;
  std::optional<std::string> remixit_metric;
  std::optional<std::size_t> filters;
  std::optional<std::size_t> taps;
  std::optional<std::size_t> hop;
  std::optional<std::size_t> blocks;
  std::optional<std::string> mask_mode;
  std::optional<bool> oracle_teacher;
  std::optional<bool> fresh_optimizer;
  std::optional<std::size_t> loader_threads;

  void attach(CLI::App* app, bool with_mode) {
    if (with_mode) app->add_option("--mode", mode, "supervised|remixit|re2re|re2re_reg");
    app->add_option("--batch", batch, "batch_size");
    app->add_option("--epochs", epochs, "epochs");
    app->add_option("--gamma", gamma, "WMA weight in [0, 1]");
    app->add_option("--wma-every", wma_every, "teacher update period");
    app->add_option("--wma-cadence", wma_cadence, "epoch|step");
    app->add_option("--lr", lr, "learning rate");
    app->add_option("--seed", seed, "run seed");
    app->add_option("--beta", beta, "Re2Re regularization weight");
    app->add_option("--strategy", strategy, "second permutation: discordant|independent");
    app->add_option("--supervised-metric", supervised_metric, "neg-si-sdr|mse");
    app->add_option("--remixit-metric", remixit_metric, "neg-si-sdr|mse");
    app->add_option("--filters", filters, "model.num_filters");
    app->add_option("--taps", taps, "model.kernel_taps");
    app->add_option("--hop", hop, "model.hop");
    app->add_option("--blocks", blocks, "model.num_blocks");
    app->add_option("--mask-mode", mask_mode, "softmax-consistent|free");
    app->add_flag("--oracle-teacher", oracle_teacher, "use ground-truth components as the teacher");
    app->add_flag("--fresh-optimizer", fresh_optimizer, "zero the optimizer moments at adaptation start");
    app->add_option("--loader-threads", loader_threads, "WAV decoding workers");
  }

  TrainConfig apply(TrainConfig c) const {
    nlohmann::json j = to_json(c);
    auto set = [&](const char* key, const auto& v) {
      if (v) j[key] = *v;
    };
    set("mode", mode);
    set("batch_size", batch);
    set("epochs", epochs);
    set("gamma", gamma);
    set("wma_every", wma_every);
    set("wma_cadence", wma_cadence);
    set("lr", lr);
    set("seed", seed);
    set("strategy", strategy);
    set("oracle_teacher", oracle_teacher);
    set("fresh_optimizer", fresh_optimizer);
    set("loader_threads", loader_threads);
    if (beta) j["loss"]["beta"] = *beta;
    if (supervised_metric) j["loss"]["supervised_metric"] = *supervised_metric;
    if (remixit_metric) j["loss"]["remixit_metric"] = *remixit_metric;
    if (filters) j["model"]["num_filters"] = *filters;
    if (taps) j["model"]["kernel_taps"] = *taps;
    if (hop) j["model"]["hop"] = *hop;
    if (blocks) j["model"]["num_blocks"] = *blocks;
    if (mask_mode) j["model"]["mask_mode"] = *mask_mode;
    // Round-trip through the strict reader so flags get the same checks as files.
    return train_config_from_json(j);
  }
};

TrainConfig load_train_config(const std::string& path, const TrainOverrides& overrides) {
  TrainConfig c;
  if (!path.empty()) c = train_config_from_json(read_json_file(path));
  return overrides.apply(c);
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw IoError("cannot write " + path.string());
}

// Timestamps go to a sidecar log so every other output stays byte-identical.
void log_run(const fs::path& dir, const std::string& what) {
  fs::create_directories(dir);
  std::ofstream log(dir / "re2re.log", std::ios::app);
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char stamp[64];
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  log << stamp << " " << what << "\n";
}

void emit_report(const MetricsReport& report, const fs::path& csv) {
  write_text(csv, report.to_csv());
  std::cout << report.to_table();
  std::cout << "wrote " << csv.string() << "\n";
}

std::vector<Mode> parse_methods(const std::string& list) {
  std::vector<Mode> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const Mode m = mode_from_name(item);
    require(is_remix_mode(m), "--methods takes adaptation modes only, got '" + item + "'");
    out.push_back(m);
  }
  require(!out.empty(), "--methods is empty");
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Teacher-student denoising adaptation (RemixIT / Re2Re) at desk scale"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "OpenMP threads (0 = runtime default)");

  // generate
  auto* gen = app.add_subcommand("generate", "synthesize a corpus (WAV files + manifest.jsonl)");
  std::string gen_config;
  std::string gen_domain = "ood";
  std::string gen_out;
  std::optional<std::uint64_t> gen_seed;
  std::optional<std::size_t> gen_train, gen_eval;
  std::optional<std::string> gen_noise;
  std::optional<double> gen_snr_mean, gen_snr_std, gen_chunk, gen_rate;
  gen->add_option("--config", gen_config, "corpus spec JSON");
  gen->add_option("--domain", gen_domain, "ood|indomain (used when the spec does not set it)");
  gen->add_option("--out", gen_out, "output directory")->required();
  gen->add_option("--seed", gen_seed, "overrides the spec seed");
  gen->add_option("--num-train", gen_train);
  gen->add_option("--num-eval", gen_eval);
  gen->add_option("--noise-kind", gen_noise, "white|pink|bandpassed");
  gen->add_option("--snr-mean-db", gen_snr_mean);
  gen->add_option("--snr-std-db", gen_snr_std);
  gen->add_option("--chunk-seconds", gen_chunk);
  gen->add_option("--sample-rate", gen_rate);

  // pretrain
  auto* pre = app.add_subcommand("pretrain", "supervised training on labeled out-of-domain data");
  std::string pre_config, pre_data, pre_out;
  TrainOverrides pre_over;
  pre->add_option("--config", pre_config, "run config JSON");
  pre->add_option("--data", pre_data, "manifest.jsonl of the labeled corpus")->required();
  pre->add_option("--out", pre_out, "output directory")->required();
  pre_over.attach(pre, false);

  // adapt
  auto* ada = app.add_subcommand("adapt", "teacher-student adaptation on unlabeled in-domain mixtures");
  std::string ada_config, ada_data, ada_ckpt, ada_out;
  TrainOverrides ada_over;
  ada->add_option("--config", ada_config, "run config JSON");
  ada->add_option("--data", ada_data, "manifest.jsonl of the in-domain corpus")->required();
  ada->add_option("--checkpoint", ada_ckpt, "pretrained checkpoint")->required();
  ada->add_option("--out", ada_out, "output directory")->required();
  ada_over.attach(ada, true);

  // evaluate
  auto* eva = app.add_subcommand("evaluate", "SI-SDR of a model on the eval split");
  std::string eva_data, eva_ckpt, eva_out, eva_method;
  bool eva_identity = false;
  std::size_t eva_loader = 1;
  eva->add_option("--data", eva_data, "manifest.jsonl with eval references")->required();
  eva->add_option("--checkpoint", eva_ckpt, "model checkpoint");
  eva->add_flag("--identity", eva_identity, "score the unprocessed mixtures");
  eva->add_option("--method", eva_method, "method label in the report");
  eva->add_option("--out", eva_out, "output directory")->required();
  eva->add_option("--loader-threads", eva_loader, "WAV decoding workers");

  // trials
  auto* tri = app.add_subcommand("trials", "repeat pretrain + adaptation over several teacher seeds");
  std::string tri_config, tri_ood, tri_ind, tri_out, tri_methods = "remixit,re2re,re2re_reg";
  std::size_t tri_n = 10;
  std::optional<std::size_t> tri_pre_epochs;
  TrainOverrides tri_over;
  tri->add_option("--config", tri_config, "run config JSON");
  tri->add_option("--ood", tri_ood, "manifest.jsonl of the labeled out-of-domain corpus")->required();
  tri->add_option("--indomain", tri_ind, "manifest.jsonl of the in-domain corpus")->required();
  tri->add_option("--out", tri_out, "output directory")->required();
  tri->add_option("--n", tri_n, "number of trials (teacher seeds seed, seed+1, ...)");
  tri->add_option("--methods", tri_methods, "comma-separated adaptation modes");
  tri->add_option("--pretrain-epochs", tri_pre_epochs, "pretraining epochs (default: --epochs)");
  tri_over.attach(tri, false);

  // verify
  auto* ver = app.add_subcommand("verify", "run the property suite");
  std::uint64_t ver_seed = 0;
  std::optional<std::string> ver_fault;
  double ver_factor = 1.5;
  std::size_t ver_points = 10;
  ver->add_option("--seed", ver_seed);
  ver->add_option("--fault-op", ver_fault, "corrupt the backward rule of this op (negative test)");
  ver->add_option("--fault-factor", ver_factor);
  ver->add_option("--gradient-points", ver_points, "random parameter points per loss");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  }

  try {
    if (threads > 0) kernels::set_threads(threads);

    if (*gen) {
      CorpusSpec spec;
      if (!gen_config.empty()) {
        spec = corpus_spec_from_json(read_json_file(gen_config));
      } else {
        spec = CorpusSpec::defaults(domain_from_name(gen_domain));
      }
      nlohmann::json j = to_json(spec);
      if (gen_seed) j["seed"] = *gen_seed;
      if (gen_train) j["num_train"] = *gen_train;
      if (gen_eval) j["num_eval"] = *gen_eval;
      if (gen_noise) j["noise_kind"] = *gen_noise;
      if (gen_snr_mean) j["snr_mean_db"] = *gen_snr_mean;
      if (gen_snr_std) j["snr_std_db"] = *gen_snr_std;
      if (gen_chunk) j["chunk_seconds"] = *gen_chunk;
      if (gen_rate) j["sample_rate"] = *gen_rate;
      spec = corpus_spec_from_json(j);
      const Manifest m = synthesize_corpus(spec, gen_out);
      log_run(gen_out, "generate " + to_json(spec).dump());
      std::cout << "wrote " << m.records.size() << " records to " << (fs::path(gen_out) / "manifest.jsonl").string()
                << "\n";
      return 0;
    }

    if (*pre) {
      TrainConfig cfg = load_train_config(pre_config, pre_over);
      cfg.mode = Mode::Supervised;
      cfg.validate();
      const Manifest m = read_manifest(pre_data);
      const Dataset train = load_dataset(m, Split::Train, true, cfg.loader_threads);
      const Checkpoint ck = pretrain_supervised(cfg, train);
      const fs::path out = fs::path(pre_out) / "pretrained.ckpt";
      fs::create_directories(pre_out);
      save_checkpoint(out, ck);
      write_text(fs::path(pre_out) / "pretrain_config.json", to_json(cfg).dump(2) + "\n");
      log_run(pre_out, "pretrain " + to_json(cfg).dump());
      std::cout << "wrote " << out.string() << " (" << ck.params.size() << " parameters)\n";
      return 0;
    }

    if (*ada) {
      TrainConfig cfg = load_train_config(ada_config, ada_over);
      cfg.validate();
      require(is_remix_mode(cfg.mode), "adapt: --mode must be remixit, re2re or re2re_reg");
      const Checkpoint teacher = load_checkpoint(ada_ckpt);
      require(teacher.params.config().same_layout(cfg.model),
              "adapt: checkpoint model layout differs from the configured model");
      const Manifest m = read_manifest(ada_data);
      const Dataset train = load_dataset(m, Split::Train, cfg.oracle_teacher, cfg.loader_threads);
      const TrainState state = adapt(cfg, teacher, train);
      const std::string name(mode_name(cfg.mode));
      fs::create_directories(ada_out);
      save_checkpoint(fs::path(ada_out) / (name + ".ckpt"), to_checkpoint(state, name));
      std::string history = "step,loss\n";
      for (std::size_t i = 0; i < state.loss_history.size(); ++i) {
        char line[64];
        std::snprintf(line, sizeof line, "%zu,%.9g\n", i, state.loss_history[i]);
        history += line;
      }
      write_text(fs::path(ada_out) / (name + "_loss.csv"), history);
      write_text(fs::path(ada_out) / (name + "_config.json"), to_json(cfg).dump(2) + "\n");
      log_run(ada_out, "adapt " + to_json(cfg).dump());
      std::cout << "wrote " << (fs::path(ada_out) / (name + ".ckpt")).string() << " after " << state.step
                << " steps, " << state.wma_events << " teacher updates\n";
      return 0;
    }

    if (*eva) {
      require(eva_identity != !eva_ckpt.empty(), "evaluate: give exactly one of --checkpoint or --identity");
      const Manifest m = read_manifest(eva_data);
      const Dataset eval = load_dataset(m, Split::Eval, true, eva_loader);
      Estimator est;
      std::string method = eva_method;
      if (eva_identity) {
        est = identity_estimator();
        if (method.empty()) method = "input";
      } else {
        const Checkpoint ck = load_checkpoint(eva_ckpt);
        est = model_estimator(ck.params);
        if (method.empty()) method = ck.label.empty() ? fs::path(eva_ckpt).stem().string() : ck.label;
      }
      const MetricsReport report = evaluate(est, eval, method);
      emit_report(report, fs::path(eva_out) / "metrics.csv");
      log_run(eva_out, "evaluate " + method);
      return 0;
    }

    if (*tri) {
      const TrainConfig base = load_train_config(tri_config, tri_over);
      TrialPlan plan;
      plan.pretrain = base;
      plan.pretrain.mode = Mode::Supervised;
      if (tri_pre_epochs) plan.pretrain.epochs = *tri_pre_epochs;
      plan.adapt = base;
      plan.methods = parse_methods(tri_methods);
      plan.num_trials = tri_n;
      plan.base_seed = base.seed;
      require(plan.num_trials >= 2, "trials: --n must be at least 2");
      plan.pretrain.validate();
      for (Mode mode : plan.methods) {
        TrainConfig c = plan.adapt;
        c.mode = mode;
        c.validate();
      }
      const Dataset ood = load_dataset(read_manifest(tri_ood), Split::Train, true, base.loader_threads);
      const Manifest ind = read_manifest(tri_ind);
      const Dataset ind_train = load_dataset(ind, Split::Train, base.oracle_teacher, base.loader_threads);
      const Dataset ind_eval = load_dataset(ind, Split::Eval, true, base.loader_threads);
      std::vector<MetricsReport> trials;
      for (std::size_t t = 0; t < plan.num_trials; ++t) {
        const std::uint64_t seed = plan.trial_seed(t);
        trials.push_back(run_trial(plan, seed, ood, ind_train, ind_eval));
        write_text(fs::path(tri_out) / ("trial_" + std::to_string(seed) + ".csv"), trials.back().to_csv());
        std::cerr << "trial " << t + 1 << "/" << plan.num_trials << " (seed " << seed << ") done\n";
      }
      emit_report(aggregate_trials(trials), fs::path(tri_out) / "trials.csv");
      log_run(tri_out, "trials n=" + std::to_string(plan.num_trials) + " " + to_json(base).dump());
      return 0;
    }

    if (*ver) {
      VerifyOptions opt;
      opt.seed = ver_seed;
      opt.fault_factor = ver_factor;
      opt.gradient_points = ver_points;
      if (ver_fault) {
        opt.fault_op = diff::op_from_name(*ver_fault);
        require(opt.fault_op.has_value(), "--fault-op: unknown op '" + *ver_fault + "'");
      }
      const auto results = run_property_suite(opt);
      std::cout << format_results(results);
      return all_passed(results) ? 0 : kExitPropertyFailure;
    }
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return 0;
}
