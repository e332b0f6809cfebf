#include "re2re/trainer.hpp"

#include <cmath>
#include <exception>
#include <map>

#include "re2re/error.hpp"

namespace re2re {

namespace {

// RNG substreams under the run seed.
constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kPretrainShuffleStream = 2;
constexpr std::uint64_t kAdaptStream = 3;

std::vector<double> gradient_of(diff::Tape& tape, diff::Var loss, diff::Var theta) {
  tape.backward(loss);
  return tape.grad(theta).values();
}

}  // namespace

std::string_view mode_name(Mode m) {
  switch (m) {
    case Mode::Supervised: return "supervised";
    case Mode::RemixIT: return "remixit";
    case Mode::Re2Re: return "re2re";
    case Mode::Re2ReReg: return "re2re_reg";
  }
  return "unknown";
}

Mode mode_from_name(std::string_view name) {
  for (Mode m : {Mode::Supervised, Mode::RemixIT, Mode::Re2Re, Mode::Re2ReReg})
    if (mode_name(m) == name) return m;
  throw ValidationError("unknown mode '" + std::string(name) + "' (supervised|remixit|re2re|re2re_reg)");
}

void TrainConfig::validate() const {
  model.validate();
  loss.validate();
  require(epochs >= 1, "epochs must be at least 1");
  require(batch_size >= 1, "batch_size must be at least 1");
  require(!is_remix_mode(mode) || batch_size >= 2,
          "batch_size must be at least 2 for mode " + std::string(mode_name(mode)) + " (remixing permutes rows)");
  require(gamma >= 0.0 && gamma <= 1.0, "gamma must lie in [0, 1]");
  require(wma_every >= 1, "wma_every must be at least 1");
  require(lr > 0.0 && std::isfinite(lr), "lr must be positive");
  require(adam.beta1 >= 0.0 && adam.beta1 < 1.0 && adam.beta2 >= 0.0 && adam.beta2 < 1.0 && adam.eps > 0.0,
          "adam: betas must lie in [0, 1) and eps must be positive");
  require(loader_threads >= 1, "loader_threads must be at least 1");
}

Checkpoint pretrain_supervised(const TrainConfig& config, const Dataset& train) {
  config.validate();
  require(train.labeled(), "pretraining needs speech and noise components for every training record");
  Rng init = make_rng(config.seed, kInitStream);
  ParamVector params = init_params(config.model, init);
  Adam optimizer(params.size(), config.lr, config.adam);
  Rng rng = make_rng(config.seed, kPretrainShuffleStream);

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    for (const auto& idx : epoch_batches(train.size(), config.batch_size, 1, rng)) {
      const SignalBatch x = gather(train, idx, Role::Mixture);
      const SignalBatch s = gather(train, idx, Role::Speech);
      const SignalBatch n = gather(train, idx, Role::Noise);
      diff::Tape tape;
      diff::Var theta = tape.leaf(Tensor({params.size()}, params.values()));
      const auto out = forward(config.model, tape.constant(x.to_tensor()), theta);
      diff::Var loss = supervised_loss(out.speech, out.noise, s, n, config.loss.supervised_metric, config.loss.si_sdr);
      params = optimizer.step(params, gradient_of(tape, loss, theta));
    }
  }
  Checkpoint ck;
  ck.params = std::move(params);
  ck.rng_state = serialize_rng(rng);
  ck.label = "pretrained seed=" + std::to_string(config.seed);
  ck.optimizer = optimizer.moments();
  return ck;
}

TrainState init_adaptation(const TrainConfig& config, const Checkpoint& pretrained) {
  config.validate();
  require(is_remix_mode(config.mode), "adaptation needs mode remixit, re2re or re2re_reg");
  TrainState state;
  state.teacher = pretrained.params;
  state.student = pretrained.params;
  if (!config.fresh_optimizer && pretrained.optimizer)
    state.optimizer = Adam(*pretrained.optimizer, config.lr, config.adam);
  else
    state.optimizer = Adam(pretrained.params.size(), config.lr, config.adam);
  state.rng = make_rng(config.seed, kAdaptStream);
  return state;
}

void adapt_epoch(TrainState& state, const TrainConfig& config, const Dataset& train) {
  require(is_remix_mode(config.mode), "adapt_epoch needs mode remixit, re2re or re2re_reg");
  require(config.batch_size >= 2, "adapt_epoch: remixing needs batch_size >= 2");
  require(!config.oracle_teacher || train.labeled(), "oracle_teacher needs labeled training data");
  const SeparatorConfig& model = state.student.config();
  const auto batches = epoch_batches(train.size(), config.batch_size, 2, state.rng);
  require(!batches.empty(), "adapt_epoch: need at least 2 training chunks");

  for (const auto& idx : batches) {
    const SignalBatch x = gather(train, idx, Role::Mixture);
    SignalBatch teacher_speech;
    SignalBatch teacher_noise;
    if (config.oracle_teacher) {
      teacher_speech = gather(train, idx, Role::Speech).with_role(Role::TeacherSpeech);
      teacher_noise = gather(train, idx, Role::Noise).with_role(Role::TeacherNoise);
    } else {
      auto [s, n] = separate(state.teacher, x);
      teacher_speech = s.with_role(Role::TeacherSpeech);
      teacher_noise = n.with_role(Role::TeacherNoise);
    }

    // Q is drawn in every mode so all modes consume the RNG identically.
    const PermutationPair pair = sample_pair(idx.size(), state.rng, config.strategy);
    const SignalBatch first = bootstrap(teacher_speech, teacher_noise, pair.p);

    diff::Tape tape;
    diff::Var theta = tape.leaf(Tensor({state.student.size()}, state.student.values()));
    const auto out = forward(model, tape.constant(first.to_tensor()), theta);
    diff::Var loss;
    switch (config.mode) {
      case Mode::RemixIT:
        loss = remixit_loss(out.speech, out.noise, teacher_speech, teacher_noise, pair.p, config.loss.remixit_metric,
                            config.loss.si_sdr);
        break;
      case Mode::Re2Re:
        loss = re2re_loss(out.speech, bootstrap_pair(teacher_speech, teacher_noise, pair).second);
        break;
      case Mode::Re2ReReg:
        loss = re2re_reg_loss(out.speech, out.noise, teacher_speech, teacher_noise, pair,
                              bootstrap_pair(teacher_speech, teacher_noise, pair).second, config.loss.beta,
                              config.loss.remixit_metric, config.loss.si_sdr);
        break;
      case Mode::Supervised:
        throw ValidationError("adapt_epoch: supervised mode has no teacher");
    }
    state.student = state.optimizer.step(state.student, gradient_of(tape, loss, theta));
    state.loss_history.push_back(loss.value().item());
    ++state.step;
    if (config.wma_cadence == WmaCadence::Step && state.step % config.wma_every == 0) {
      state.teacher = wma_update(state.teacher, state.student, config.gamma);
      ++state.wma_events;
    }
  }
  ++state.epoch;
  if (config.wma_cadence == WmaCadence::Epoch && state.epoch % config.wma_every == 0) {
    state.teacher = wma_update(state.teacher, state.student, config.gamma);
    ++state.wma_events;
  }
}

TrainState adapt(const TrainConfig& config, const Checkpoint& pretrained, const Dataset& train) {
  TrainState state = init_adaptation(config, pretrained);
  for (std::size_t e = 0; e < config.epochs; ++e) adapt_epoch(state, config, train);
  return state;
}

Checkpoint to_checkpoint(const TrainState& state, std::string label) {
  Checkpoint ck;
  ck.params = state.student;
  ck.rng_state = serialize_rng(state.rng);
  ck.label = std::move(label);
  ck.optimizer = state.optimizer.moments();
  return ck;
}

Estimator model_estimator(const ParamVector& params) {
  return [params](const SignalBatch& mixture) { return separate(params, mixture).first; };
}

Estimator identity_estimator() {
  return [](const SignalBatch& mixture) { return mixture.with_role(Role::StudentSpeech); };
}

std::string snr_bucket(double snr) {
  if (snr < 0.0) return "snr<0";
  if (snr < 5.0) return "snr0-5";
  if (snr < 10.0) return "snr5-10";
  return "snr>=10";
}

std::vector<UtteranceScore> score_utterances(const Estimator& estimator, const Dataset& eval) {
  require(eval.labeled(), "evaluation needs reference speech for every record");
  std::vector<UtteranceScore> scores(eval.size());
  std::vector<std::exception_ptr> errors(eval.size());
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t job = 0; job < static_cast<std::int64_t>(eval.size()); ++job) {
    const auto i = static_cast<std::size_t>(job);
    try {
      const Utterance& u = eval.items[i];
      const SignalBatch x(1, u.mixture.size(), u.mixture, Role::Mixture, eval.sample_rate);
      const SignalBatch est = estimator(x);
      scores[i] = {u.id, u.noise_kind, u.snr_db, si_sdr(est.row(0), *u.speech)};
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return scores;
}

MetricsReport evaluate(const Estimator& estimator, const Dataset& eval, const std::string& method) {
  const auto scores = score_utterances(estimator, eval);
  std::vector<std::string> order;
  std::map<std::string, std::vector<double>> groups;
  auto push = [&](const std::string& cond, double v) {
    if (!groups.contains(cond)) order.push_back(cond);
    groups[cond].push_back(v);
  };
  for (const auto& s : scores) push(std::string(noise_kind_name(s.noise_kind)) + ":all", s.si_sdr_db);
  for (const char* bucket : {"snr<0", "snr0-5", "snr5-10", "snr>=10"})
    for (const auto& s : scores)
      if (snr_bucket(s.snr_db) == bucket) push(std::string(noise_kind_name(s.noise_kind)) + ":" + bucket, s.si_sdr_db);
  MetricsReport report;
  for (const auto& cond : order) report.rows.push_back(summarize(method, cond, groups[cond]));
  return report;
}

MetricsReport run_trial(const TrialPlan& plan, std::uint64_t seed, const Dataset& ood_train,
                        const Dataset& indomain_train, const Dataset& indomain_eval) {
  TrainConfig pre = plan.pretrain;
  pre.mode = Mode::Supervised;
  pre.seed = seed;
  const Checkpoint teacher = pretrain_supervised(pre, ood_train);

  MetricsReport report = evaluate(identity_estimator(), indomain_eval, "input");
  report.append(evaluate(model_estimator(teacher.params), indomain_eval, "pretrained"));
  for (Mode mode : plan.methods) {
    TrainConfig cfg = plan.adapt;
    cfg.mode = mode;
    cfg.seed = seed;
    const TrainState state = adapt(cfg, teacher, indomain_train);
    report.append(evaluate(model_estimator(state.student), indomain_eval, std::string(mode_name(mode))));
  }
  for (auto& row : report.rows) row.trial_seeds = {seed};
  return report;
}

MetricsReport aggregate_trials(const std::vector<MetricsReport>& trials) {
  std::vector<std::pair<std::string, std::string>> order;
  std::map<std::pair<std::string, std::string>, std::vector<double>> values;
  std::map<std::pair<std::string, std::string>, std::vector<std::uint64_t>> seeds;
  for (const auto& trial : trials)
    for (const auto& row : trial.rows) {
      const auto key = std::make_pair(row.method, row.condition);
      if (!values.contains(key)) order.push_back(key);
      values[key].push_back(row.mean);
      seeds[key].insert(seeds[key].end(), row.trial_seeds.begin(), row.trial_seeds.end());
    }
  MetricsReport out;
  for (const auto& key : order) {
    MetricsRow row = summarize(key.first, key.second, values[key]);
    row.trial_seeds = seeds[key];
    out.rows.push_back(std::move(row));
  }
  return out;
}

MetricsReport multi_trial(const TrialPlan& plan, const Dataset& ood_train, const Dataset& indomain_train,
                          const Dataset& indomain_eval) {
  require(plan.num_trials >= 2, "multi_trial needs at least 2 trials");
  std::vector<MetricsReport> trials;
  for (std::size_t t = 0; t < plan.num_trials; ++t)
    trials.push_back(run_trial(plan, plan.trial_seed(t), ood_train, indomain_train, indomain_eval));
  return aggregate_trials(trials);
}

}  // namespace re2re
