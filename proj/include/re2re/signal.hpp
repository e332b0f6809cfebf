#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <string_view>
#include <vector>

#include "re2re/tape.hpp"
#include "re2re/tensor.hpp"

namespace re2re {

/// What a batch holds. Purely descriptive; no operation depends on it.
enum class Role {
  Mixture,
  Speech,
  Noise,
  TeacherSpeech,
  TeacherNoise,
  BootstrapFirst,   // s~ + P n~
  BootstrapSecond,  // s~ + Q n~
  StudentSpeech,
  StudentNoise,
};

std::string_view role_name(Role role);

/// B x T waveforms, one row per utterance chunk.
class SignalBatch {
 public:
  SignalBatch() = default;
  SignalBatch(std::size_t rows, std::size_t length, std::vector<double> samples, Role role = Role::Mixture,
              double sample_rate = 8000.0);
  SignalBatch(std::size_t rows, std::size_t length, Role role = Role::Mixture, double sample_rate = 8000.0);

  static SignalBatch from_rows(const std::vector<std::vector<double>>& rows, Role role = Role::Mixture,
                               double sample_rate = 8000.0);
  static SignalBatch from_tensor(const Tensor& t, Role role, double sample_rate = 8000.0);

  std::size_t rows() const { return rows_; }
  std::size_t length() const { return length_; }
  Role role() const { return role_; }
  double sample_rate() const { return sample_rate_; }

  std::span<const double> row(std::size_t b) const;
  std::span<double> row(std::size_t b);
  std::span<const double> samples() const { return samples_; }
  std::span<double> samples() { return samples_; }

  SignalBatch with_role(Role role) const;
  Tensor to_tensor() const { return Tensor({rows_, length_}, samples_); }

  bool same_shape(const SignalBatch& other) const { return rows_ == other.rows_ && length_ == other.length_; }
  /// Equal samples and shape; role and rate are metadata.
  bool operator==(const SignalBatch& other) const {
    return same_shape(other) && samples_ == other.samples_;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t length_ = 0;
  std::vector<double> samples_;
  Role role_ = Role::Mixture;
  double sample_rate_ = 8000.0;
};

/// x = s + n
SignalBatch mix(const SignalBatch& speech, const SignalBatch& noise);
SignalBatch add(const SignalBatch& a, const SignalBatch& b, Role role);
SignalBatch subtract(const SignalBatch& a, const SignalBatch& b, Role role);

struct SiSdrOptions {
  /// Subtract each row's mean before scoring. Off by default.
  bool zero_mean = false;
};

/// Exact scale-invariant SDR in dB. Returns +infinity (see is_perfect) when the
/// estimate is an exact multiple of the reference. Throws on a silent reference.
double si_sdr(std::span<const double> estimate, std::span<const double> reference, SiSdrOptions options = {});
std::vector<double> si_sdr_rows(const SignalBatch& estimate, const SignalBatch& reference,
                                SiSdrOptions options = {});
inline bool is_perfect(double si_sdr_db) { return si_sdr_db == std::numeric_limits<double>::infinity(); }

double mse(const SignalBatch& a, const SignalBatch& b);

inline constexpr double kSiSdrEps = 1e-8;

/// -mean_b 10 log10((|a s|^2 + eps) / (|a s - s^|^2 + eps)), a = <s^, s> / <s, s>.
diff::Var neg_si_sdr_loss(diff::Var estimate, diff::Var reference, double eps = kSiSdrEps,
                          SiSdrOptions options = {});
/// Mean over all B*T entries of the squared difference.
diff::Var mse_loss(diff::Var a, diff::Var b);

}  // namespace re2re
