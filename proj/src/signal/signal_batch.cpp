#include <cmath>

#include "re2re/error.hpp"
#include "re2re/signal.hpp"

namespace re2re {

std::string_view role_name(Role role) {
  switch (role) {
    case Role::Mixture: return "mixture";
    case Role::Speech: return "speech";
    case Role::Noise: return "noise";
    case Role::TeacherSpeech: return "teacher-speech";
    case Role::TeacherNoise: return "teacher-noise";
    case Role::BootstrapFirst: return "bootstrap-first";
    case Role::BootstrapSecond: return "bootstrap-second";
    case Role::StudentSpeech: return "student-speech";
    case Role::StudentNoise: return "student-noise";
  }
  return "unknown";
}

SignalBatch::SignalBatch(std::size_t rows, std::size_t length, std::vector<double> samples, Role role,
                         double sample_rate)
    : rows_(rows), length_(length), samples_(std::move(samples)), role_(role), sample_rate_(sample_rate) {
  require(rows_ >= 1 && length_ >= 1, "signal batch needs at least one row and one sample");
  require(samples_.size() == rows_ * length_, "signal batch: sample count does not match rows x length");
  for (double v : samples_) require(std::isfinite(v), "signal batch contains a non-finite sample");
}

SignalBatch::SignalBatch(std::size_t rows, std::size_t length, Role role, double sample_rate)
    : SignalBatch(rows, length, std::vector<double>(rows * length, 0.0), role, sample_rate) {}

SignalBatch SignalBatch::from_rows(const std::vector<std::vector<double>>& rows, Role role, double sample_rate) {
  require(!rows.empty(), "signal batch needs at least one row");
  const std::size_t length = rows.front().size();
  std::vector<double> samples;
  samples.reserve(rows.size() * length);
  for (const auto& r : rows) {
    require(r.size() == length, "signal batch rows must share one length");
    samples.insert(samples.end(), r.begin(), r.end());
  }
  return SignalBatch(rows.size(), length, std::move(samples), role, sample_rate);
}

SignalBatch SignalBatch::from_tensor(const Tensor& t, Role role, double sample_rate) {
  require(t.rank() == 2, "signal batch tensor must be [B, T], got " + to_string(t.shape()));
  return SignalBatch(t.dim(0), t.dim(1), t.values(), role, sample_rate);
}

std::span<const double> SignalBatch::row(std::size_t b) const {
  require(b < rows_, "row index out of range");
  return std::span<const double>(samples_).subspan(b * length_, length_);
}

std::span<double> SignalBatch::row(std::size_t b) {
  require(b < rows_, "row index out of range");
  return std::span<double>(samples_).subspan(b * length_, length_);
}

SignalBatch SignalBatch::with_role(Role role) const {
  SignalBatch out = *this;
  out.role_ = role;
  return out;
}

SignalBatch add(const SignalBatch& a, const SignalBatch& b, Role role) {
  require(a.same_shape(b), "signal shapes differ");
  std::vector<double> out(a.samples().size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.samples()[i] + b.samples()[i];
  return SignalBatch(a.rows(), a.length(), std::move(out), role, a.sample_rate());
}

SignalBatch subtract(const SignalBatch& a, const SignalBatch& b, Role role) {
  require(a.same_shape(b), "signal shapes differ");
  std::vector<double> out(a.samples().size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.samples()[i] - b.samples()[i];
  return SignalBatch(a.rows(), a.length(), std::move(out), role, a.sample_rate());
}

SignalBatch mix(const SignalBatch& speech, const SignalBatch& noise) {
  require(speech.same_shape(noise), "mix: speech and noise shapes differ");
  return add(speech, noise, Role::Mixture);
}

}  // namespace re2re
