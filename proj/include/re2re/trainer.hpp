#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "re2re/checkpoint.hpp"
#include "re2re/losses.hpp"
#include "re2re/remixer.hpp"
#include "re2re/report.hpp"
#include "re2re/rng.hpp"
#include "re2re/separator.hpp"
#include "re2re/synthdata.hpp"

namespace re2re {

enum class Mode { Supervised, RemixIT, Re2Re, Re2ReReg };

std::string_view mode_name(Mode m);
Mode mode_from_name(std::string_view name);
inline bool is_remix_mode(Mode m) { return m != Mode::Supervised; }

enum class WmaCadence { Epoch, Step };

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  bool operator==(const AdamConfig&) const = default;
};

struct TrainConfig {
  Mode mode = Mode::Re2Re;
  std::size_t batch_size = 24;
  std::size_t epochs = 20;
  double gamma = 0.01;
  /// Teacher update period, in epochs or optimizer steps depending on the cadence.
  std::size_t wma_every = 1;
  WmaCadence wma_cadence = WmaCadence::Epoch;
  double lr = 3e-3;
  AdamConfig adam;
  std::uint64_t seed = 0;
  LossConfig loss;
  PairStrategy strategy = PairStrategy::Discordant;
  SeparatorConfig model;
  /// Replace teacher inference with the ground-truth components (synthetic
  /// data only). Diagnostic; lets adaptation be tested without a teacher error.
  bool oracle_teacher = false;
  /// Start adaptation with zeroed optimizer moments instead of the ones stored
  /// in the pretrained checkpoint.
  bool fresh_optimizer = true;
  /// Worker threads used to decode WAV files.
  std::size_t loader_threads = 1;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

// ---------------------------------------------------------------------------
// Data

struct Utterance {
  std::string id;
  NoiseKind noise_kind = NoiseKind::White;
  double snr_db = 0.0;
  std::vector<double> mixture;
  std::optional<std::vector<double>> speech;
  std::optional<std::vector<double>> noise;
};

/// Decoded chunks of one manifest split, ordered by utterance id.
struct Dataset {
  std::vector<Utterance> items;
  double sample_rate = 8000.0;

  std::size_t size() const { return items.size(); }
  std::size_t length() const { return items.empty() ? 0 : items.front().mixture.size(); }
  bool labeled() const;
};

/// Reads and decodes a split. With `require_labels`, fails unless every record
/// lists its speech and noise. Component files are never opened for in-domain
/// training records, which carry none.
Dataset load_dataset(const Manifest& manifest, Split split, bool require_labels, std::size_t workers = 1);

SignalBatch gather(const Dataset& data, const std::vector<std::size_t>& indices, Role role);

/// Shuffled index batches covering each chunk once; a trailing batch smaller
/// than `min_batch` is dropped.
std::vector<std::vector<std::size_t>> epoch_batches(std::size_t count, std::size_t batch_size,
                                                    std::size_t min_batch, Rng& rng);

// ---------------------------------------------------------------------------
// Optimizer

class Adam {
 public:
  Adam(std::size_t size, double lr, AdamConfig config = {});
  Adam(AdamMoments moments, double lr, AdamConfig config = {});

  ParamVector step(const ParamVector& params, const std::vector<double>& grad);
  const AdamMoments& moments() const { return moments_; }

 private:
  AdamMoments moments_;
  double lr_;
  AdamConfig config_;
};

// ---------------------------------------------------------------------------
// Training

struct TrainState {
  std::size_t epoch = 0;
  std::size_t step = 0;
  ParamVector teacher;
  ParamVector student;
  Adam optimizer{0, 1e-3};
  Rng rng;
  std::vector<double> loss_history;  // one entry per optimizer step
  std::size_t wma_events = 0;
};

/// Supervised training from scratch on labeled (out-of-domain) data.
Checkpoint pretrain_supervised(const TrainConfig& config, const Dataset& train);

/// Teacher and student both start from `pretrained`.
TrainState init_adaptation(const TrainConfig& config, const Checkpoint& pretrained);

/// One epoch of teacher-student adaptation over unlabeled mixtures.
void adapt_epoch(TrainState& state, const TrainConfig& config, const Dataset& train);

/// init_adaptation followed by config.epochs calls to adapt_epoch.
TrainState adapt(const TrainConfig& config, const Checkpoint& pretrained, const Dataset& train);

Checkpoint to_checkpoint(const TrainState& state, std::string label);

// ---------------------------------------------------------------------------
// Evaluation

using Estimator = std::function<SignalBatch(const SignalBatch& mixture)>;

Estimator model_estimator(const ParamVector& params);
/// s^ := x, the unprocessed input.
Estimator identity_estimator();

struct UtteranceScore {
  std::string id;
  NoiseKind noise_kind = NoiseKind::White;
  double snr_db = 0.0;
  double si_sdr_db = 0.0;
};

/// Per-utterance SI-SDR of the speech estimate; parallel over utterances.
std::vector<UtteranceScore> score_utterances(const Estimator& estimator, const Dataset& eval);

/// Mean/std of per-utterance SI-SDR for every condition (noise kind overall
/// and per SNR bucket).
MetricsReport evaluate(const Estimator& estimator, const Dataset& eval, const std::string& method);

std::string snr_bucket(double snr_db);

// ---------------------------------------------------------------------------
// Repeated trials

struct TrialPlan {
  TrainConfig pretrain;
  TrainConfig adapt;
  std::vector<Mode> methods{Mode::RemixIT, Mode::Re2Re, Mode::Re2ReReg};
  std::size_t num_trials = 10;
  std::uint64_t base_seed = 0;

  std::uint64_t trial_seed(std::size_t trial) const { return base_seed + trial; }
};

/// Mean eval SI-SDR per method and condition for one teacher seed. Methods:
/// "input", "pretrained" and one row per adaptation mode.
MetricsReport run_trial(const TrialPlan& plan, std::uint64_t seed, const Dataset& ood_train,
                        const Dataset& indomain_train, const Dataset& indomain_eval);

/// Combines single-trial reports (n = 1 rows) into mean +- sample std rows.
MetricsReport aggregate_trials(const std::vector<MetricsReport>& trials);

MetricsReport multi_trial(const TrialPlan& plan, const Dataset& ood_train, const Dataset& indomain_train,
                          const Dataset& indomain_eval);

}  // namespace re2re
