#include <cmath>
#include <limits>
#include <numeric>

#include "re2re/error.hpp"
#include "re2re/signal.hpp"

namespace re2re {

namespace {

std::vector<double> centered(std::span<const double> x) {
  const double m = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
  std::vector<double> out(x.begin(), x.end());
  for (double& v : out) v -= m;
  return out;
}

}  // namespace

double si_sdr(std::span<const double> estimate, std::span<const double> reference, SiSdrOptions options) {
  require(estimate.size() == reference.size(), "si_sdr: length mismatch");
  if (options.zero_mean) {
    const auto e = centered(estimate);
    const auto r = centered(reference);
    return si_sdr(e, r, {});
  }
  const double ref_energy = dot(reference, reference);
  require(ref_energy > 0.0, "si_sdr: reference has zero energy");
  const double alpha = dot(estimate, reference) / ref_energy;
  double target = 0.0;
  double error = 0.0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    const double t = alpha * reference[i];
    target += t * t;
    error += (t - estimate[i]) * (t - estimate[i]);
  }
  if (error == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(target / error);
}

std::vector<double> si_sdr_rows(const SignalBatch& estimate, const SignalBatch& reference, SiSdrOptions options) {
  require(estimate.same_shape(reference), "si_sdr: batch shapes differ");
  std::vector<double> out(estimate.rows());
  for (std::size_t b = 0; b < out.size(); ++b) out[b] = si_sdr(estimate.row(b), reference.row(b), options);
  return out;
}

double mse(const SignalBatch& a, const SignalBatch& b) {
  require(a.same_shape(b), "mse: batch shapes differ");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.samples().size(); ++i) {
    const double d = a.samples()[i] - b.samples()[i];
    acc += d * d;
  }
  return acc / static_cast<double>(a.samples().size());
}

namespace {

diff::Var center_rows(diff::Var x) {
  const Tensor& v = x.value();
  const double inv_len = 1.0 / static_cast<double>(v.dim(1));
  diff::Var row_mean = diff::scale(diff::sum_rows(x), inv_len);
  diff::Var ones = x.tape->constant(Tensor(v.shape(), 1.0));
  return diff::sub(x, diff::scale_rows(ones, row_mean));
}

}  // namespace

diff::Var neg_si_sdr_loss(diff::Var estimate, diff::Var reference, double eps, SiSdrOptions options) {
  require(estimate.shape() == reference.shape() && estimate.value().rank() == 2,
          "neg_si_sdr_loss: expected equal [B, T] shapes, got " + to_string(estimate.shape()) + " and " +
              to_string(reference.shape()));
  require(eps > 0.0, "neg_si_sdr_loss: eps must be positive");
  if (options.zero_mean) {
    estimate = center_rows(estimate);
    reference = center_rows(reference);
  }
  diff::Var ref_energy = diff::sum_rows(diff::square(reference));
  for (double e : ref_energy.value().data()) require(e > 0.0, "neg_si_sdr_loss: reference row has zero energy");
  diff::Var alpha = diff::div(diff::sum_rows(diff::mul(estimate, reference)), ref_energy);
  diff::Var target = diff::scale_rows(reference, alpha);
  diff::Var error = diff::sub(target, estimate);
  diff::Var num = diff::shift(diff::sum_rows(diff::square(target)), eps);
  diff::Var den = diff::shift(diff::sum_rows(diff::square(error)), eps);
  diff::Var sdr = diff::scale(diff::log10(diff::div(num, den)), 10.0);
  return diff::scale(diff::mean(sdr), -1.0);
}

diff::Var mse_loss(diff::Var a, diff::Var b) {
  require(a.shape() == b.shape(), "mse_loss: shape mismatch " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  return diff::mean(diff::square(diff::sub(a, b)));
}

}  // namespace re2re
