#pragma once

#include <string_view>
#include <vector>

#include "re2re/remixer.hpp"
#include "re2re/signal.hpp"
#include "re2re/tape.hpp"

namespace re2re {

enum class Metric { NegSiSdr, Mse };

std::string_view metric_name(Metric m);
Metric metric_from_name(std::string_view name);

struct LossConfig {
  Metric supervised_metric = Metric::NegSiSdr;
  Metric remixit_metric = Metric::NegSiSdr;
  Metric re2re_metric = Metric::Mse;  // only mse is meaningful for the noisy-target loss
  double beta = 100.0;
  SiSdrOptions si_sdr;

  void validate() const;
  bool operator==(const LossConfig& o) const {
    return supervised_metric == o.supervised_metric && remixit_metric == o.remixit_metric &&
           re2re_metric == o.re2re_metric && beta == o.beta && si_sdr.zero_mean == o.si_sdr.zero_mean;
  }
};

/// Per-batch reconstruction error under `metric`, averaged over rows.
diff::Var reconstruction_loss(diff::Var estimate, diff::Var target, Metric metric, SiSdrOptions options = {});

/// L(s^, s) + L(n^, n)
diff::Var supervised_loss(diff::Var speech_est, diff::Var noise_est, const SignalBatch& speech,
                          const SignalBatch& noise, Metric metric, SiSdrOptions options = {});

/// L(s^, s~) + L(n^, P n~). The noise target is the permuted teacher noise.
diff::Var remixit_loss(diff::Var speech_est, diff::Var noise_est, const SignalBatch& teacher_speech,
                       const SignalBatch& teacher_noise, const Permutation& perm, Metric metric,
                       SiSdrOptions options = {});

/// mse(s^, x-): the student's speech estimate on x~ against the second bootstrap.
diff::Var re2re_loss(diff::Var speech_est, const SignalBatch& second_bootstrap);

/// remixit + beta * re2re
diff::Var re2re_reg_loss(diff::Var speech_est, diff::Var noise_est, const SignalBatch& teacher_speech,
                         const SignalBatch& teacher_noise, const PermutationPair& pair,
                         const SignalBatch& second_bootstrap, double beta, Metric remixit_metric,
                         SiSdrOptions options = {});

/// Squared-error decomposition of the distillation target against ground truth:
///   total = student_error - 2 cross_term + teacher_error + residual
/// with every expectation a mean over rows (and over the M student estimates)
/// of per-row squared L2 norms / inner products.
struct DecompositionReport {
  double total = 0.0;                // E|s^ - s~|^2
  double student_error_term = 0.0;   // E|s^ - s|^2
  double teacher_error_term = 0.0;   // E|s~ - s|^2
  double cross_term = 0.0;           // E[(s~ - s)^T (s^ - s)]
  /// E[(s~ - s)^T (mean_m s^_m - s~)]: teacher error against the empirical
  /// mean student error. total == student - teacher - 2 this, exactly.
  double teacher_mean_student_cross = 0.0;
  double residual = 0.0;
  std::size_t estimates = 1;         // M
};

DecompositionReport decompose_remixit(const SignalBatch& student_speech, const SignalBatch& teacher_speech,
                                      const SignalBatch& clean_speech);
DecompositionReport decompose_remixit(const std::vector<SignalBatch>& student_speech,
                                      const SignalBatch& teacher_speech, const SignalBatch& clean_speech);

}  // namespace re2re
