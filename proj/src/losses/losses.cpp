#include "re2re/losses.hpp"

#include <cmath>

#include "re2re/error.hpp"

namespace re2re {

std::string_view metric_name(Metric m) { return m == Metric::NegSiSdr ? "neg-si-sdr" : "mse"; }

Metric metric_from_name(std::string_view name) {
  if (name == "neg-si-sdr") return Metric::NegSiSdr;
  if (name == "mse") return Metric::Mse;
  throw ValidationError("unknown metric '" + std::string(name) + "'");
}

void LossConfig::validate() const {
  require(beta >= 0.0 && std::isfinite(beta), "loss.beta must be a finite value >= 0");
  require(re2re_metric == Metric::Mse, "loss.re2re_metric must be mse");
}

diff::Var reconstruction_loss(diff::Var estimate, diff::Var target, Metric metric, SiSdrOptions options) {
  return metric == Metric::Mse ? mse_loss(estimate, target) : neg_si_sdr_loss(estimate, target, kSiSdrEps, options);
}

namespace {

diff::Var constant_of(diff::Var like, const SignalBatch& batch) {
  require(like.shape() == Shape({batch.rows(), batch.length()}),
          "loss target shape [" + std::to_string(batch.rows()) + "x" + std::to_string(batch.length()) +
              "] does not match estimate " + to_string(like.shape()));
  return like.tape->constant(batch.to_tensor());
}

}  // namespace

diff::Var supervised_loss(diff::Var speech_est, diff::Var noise_est, const SignalBatch& speech,
                          const SignalBatch& noise, Metric metric, SiSdrOptions options) {
  return diff::add(reconstruction_loss(speech_est, constant_of(speech_est, speech), metric, options),
                   reconstruction_loss(noise_est, constant_of(noise_est, noise), metric, options));
}

diff::Var remixit_loss(diff::Var speech_est, diff::Var noise_est, const SignalBatch& teacher_speech,
                       const SignalBatch& teacher_noise, const Permutation& perm, Metric metric,
                       SiSdrOptions options) {
  const SignalBatch permuted = apply(perm, teacher_noise);
  return diff::add(reconstruction_loss(speech_est, constant_of(speech_est, teacher_speech), metric, options),
                   reconstruction_loss(noise_est, constant_of(noise_est, permuted), metric, options));
}

diff::Var re2re_loss(diff::Var speech_est, const SignalBatch& second_bootstrap) {
  return mse_loss(speech_est, constant_of(speech_est, second_bootstrap));
}

diff::Var re2re_reg_loss(diff::Var speech_est, diff::Var noise_est, const SignalBatch& teacher_speech,
                         const SignalBatch& teacher_noise, const PermutationPair& pair,
                         const SignalBatch& second_bootstrap, double beta, Metric remixit_metric,
                         SiSdrOptions options) {
  require(beta >= 0.0, "re2re_reg_loss: beta must be >= 0");
  diff::Var base = remixit_loss(speech_est, noise_est, teacher_speech, teacher_noise, pair.p, remixit_metric, options);
  return diff::add(base, diff::scale(re2re_loss(speech_est, second_bootstrap), beta));
}

DecompositionReport decompose_remixit(const SignalBatch& student_speech, const SignalBatch& teacher_speech,
                                      const SignalBatch& clean_speech) {
  return decompose_remixit(std::vector<SignalBatch>{student_speech}, teacher_speech, clean_speech);
}

DecompositionReport decompose_remixit(const std::vector<SignalBatch>& student_speech,
                                      const SignalBatch& teacher_speech, const SignalBatch& clean_speech) {
  require(!student_speech.empty(), "decompose_remixit: need at least one student estimate");
  require(teacher_speech.same_shape(clean_speech), "decompose_remixit: teacher and reference shapes differ");
  for (const auto& s : student_speech)
    require(s.same_shape(clean_speech), "decompose_remixit: student and reference shapes differ");

  const std::size_t rows = clean_speech.rows();
  const std::size_t len = clean_speech.length();
  const double m_count = static_cast<double>(student_speech.size());
  DecompositionReport r;
  r.estimates = student_speech.size();

  for (std::size_t b = 0; b < rows; ++b) {
    const auto s = clean_speech.row(b);
    const auto teacher = teacher_speech.row(b);
    double teacher_err = 0.0;
    for (std::size_t t = 0; t < len; ++t) teacher_err += (teacher[t] - s[t]) * (teacher[t] - s[t]);
    r.teacher_error_term += teacher_err;

    for (const auto& est_batch : student_speech) {
      const auto est = est_batch.row(b);
      double total = 0.0, student = 0.0, cross = 0.0, paper_cross = 0.0;
      for (std::size_t t = 0; t < len; ++t) {
        const double te = teacher[t] - s[t];
        total += (est[t] - teacher[t]) * (est[t] - teacher[t]);
        student += (est[t] - s[t]) * (est[t] - s[t]);
        cross += te * (est[t] - s[t]);
        paper_cross += te * (est[t] - teacher[t]);
      }
      r.total += total / m_count;
      r.student_error_term += student / m_count;
      r.cross_term += cross / m_count;
      r.teacher_mean_student_cross += paper_cross / m_count;
    }
  }
  const double n = static_cast<double>(rows);
  r.total /= n;
  r.student_error_term /= n;
  r.teacher_error_term /= n;
  r.cross_term /= n;
  r.teacher_mean_student_cross /= n;
  r.residual = r.total - (r.student_error_term + r.teacher_error_term - 2.0 * r.cross_term);
  return r;
}

}  // namespace re2re
