#include "re2re/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <cstdio>
#include <map>
#include <numbers>
#include <random>

#include "re2re/error.hpp"
#include "re2re/kernels.hpp"
#include "re2re/losses.hpp"
#include "re2re/remixer.hpp"
#include "re2re/signal.hpp"

namespace re2re {

using diff::Op;
using diff::Tape;
using diff::Var;

namespace {

double rel_error(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-12}); }

Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(numel(shape));
  for (auto& x : v) x = u(rng);
  return Tensor(std::move(shape), std::move(v));
}

// Values with |x| in [0.2, 1] and a random sign, away from the relu kink.
Tensor signed_tensor(Shape shape, Rng& rng) {
  Tensor t = random_tensor(std::move(shape), rng, 0.2, 1.0);
  std::bernoulli_distribution flip(0.5);
  for (auto& x : t.values())
    if (flip(rng)) x = -x;
  return t;
}

SignalBatch gaussian_batch(std::size_t rows, std::size_t length, double sd, Rng& rng, Role role) {
  std::normal_distribution<double> g(0.0, sd);
  std::vector<double> v(rows * length);
  for (auto& x : v) x = g(rng);
  return SignalBatch(rows, length, std::move(v), role);
}

struct Evaluation {
  double value = 0.0;
  // Which side of zero every relu/prelu output lies on.
  std::vector<bool> activation_signs;
};

Evaluation evaluate_fn(const ScalarFn& fn, const std::vector<Tensor>& leaves) {
  Tape tape;
  std::vector<Var> vars;
  for (const auto& t : leaves) vars.push_back(tape.constant(t));
  Evaluation e;
  e.value = fn(tape, vars).value().item();
  for (std::size_t id = 0; id < tape.size(); ++id) {
    const Op op = tape.op(Var{&tape, id});
    if (op != Op::Relu && op != Op::Prelu) continue;
    for (double v : tape.value(id).data()) e.activation_signs.push_back(v > 0.0);
  }
  return e;
}

template <typename Fn>
PropertyResult timed(const std::string& name, Fn&& fn) {
  const auto start = std::chrono::steady_clock::now();
  PropertyResult r;
  try {
    r = fn();
  } catch (const std::exception& e) {
    r.passed = false;
    r.detail = std::string("threw: ") + e.what();
  }
  r.name = name;
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

PropertyResult gate(double measured, double tolerance, std::string detail = {}) {
  PropertyResult r;
  r.measured = measured;
  r.tolerance = tolerance;
  r.passed = measured < tolerance;
  r.detail = std::move(detail);
  return r;
}

// ---------------------------------------------------------------------------
// Per-op gradient checks

struct OpCase {
  Op op;
  std::vector<Tensor> leaves;
  std::function<Var(Tape&, const std::vector<Var>&)> build;
};

// Reduces any tensor to a scalar through fixed random weights so the upstream
// gradient is not uniform.
Var weighted_sum(Tape& tape, Var out) {
  if (out.value().size() == 1) return out;
  Rng rng(0x5eed);
  Tensor w = random_tensor(out.shape(), rng, 0.5, 1.5);
  return diff::sum(diff::mul(out, tape.constant(w)));
}

std::vector<OpCase> op_cases(Rng& rng) {
  using namespace diff;
  std::vector<OpCase> c;
  auto r = [&](Shape s) { return random_tensor(std::move(s), rng); };
  auto pos = [&](Shape s) { return random_tensor(std::move(s), rng, 0.5, 2.0); };
  auto sg = [&](Shape s) { return signed_tensor(std::move(s), rng); };

  c.push_back({Op::Add, {r({2, 3}), r({3})}, [](Tape&, const auto& v) { return add(v[0], v[1]); }});
  c.push_back({Op::Sub, {r({2, 3}), r({2, 3})}, [](Tape&, const auto& v) { return sub(v[0], v[1]); }});
  c.push_back({Op::Mul, {r({2, 3}), r({2, 3})}, [](Tape&, const auto& v) { return mul(v[0], v[1]); }});
  c.push_back({Op::Div, {r({2, 3}), pos({2, 3})}, [](Tape&, const auto& v) { return div(v[0], v[1]); }});
  c.push_back({Op::Scale, {r({2, 3})}, [](Tape&, const auto& v) { return scale(v[0], 1.7); }});
  c.push_back({Op::Shift, {r({2, 3})}, [](Tape&, const auto& v) { return shift(v[0], 0.3); }});
  c.push_back({Op::Relu, {sg({2, 3})}, [](Tape&, const auto& v) { return relu(v[0]); }});
  c.push_back({Op::Prelu, {sg({2, 3}), pos({1})}, [](Tape&, const auto& v) { return prelu(v[0], v[1]); }});
  c.push_back({Op::Sigmoid, {r({2, 3})}, [](Tape&, const auto& v) { return sigmoid(v[0]); }});
  c.push_back({Op::Log10, {pos({2, 3})}, [](Tape&, const auto& v) { return log10(v[0]); }});
  c.push_back({Op::Square, {r({2, 3})}, [](Tape&, const auto& v) { return square(v[0]); }});
  c.push_back({Op::Sqrt, {pos({2, 3})}, [](Tape&, const auto& v) { return sqrt(v[0]); }});
  c.push_back({Op::Sum, {r({2, 3})}, [](Tape&, const auto& v) { return sum(square(v[0])); }});
  c.push_back({Op::Mean, {r({2, 3})}, [](Tape&, const auto& v) { return mean(square(v[0])); }});
  c.push_back({Op::SumRows, {r({2, 5})}, [](Tape&, const auto& v) { return sum_rows(v[0]); }});
  c.push_back({Op::ScaleRows, {r({2, 5}), r({2})}, [](Tape&, const auto& v) { return scale_rows(v[0], v[1]); }});
  c.push_back({Op::Conv1d, {r({2, 12}), r({3, 4})}, [](Tape&, const auto& v) { return conv1d(v[0], v[1], 2); }});
  c.push_back({Op::Conv1dTransposed, {r({2, 3, 5}), r({3, 4})},
               [](Tape&, const auto& v) { return conv1d_transposed(v[0], v[1], 2, 12); }});
  c.push_back({Op::ChannelMix, {r({2, 3, 5}), r({4, 3}), r({4})},
               [](Tape&, const auto& v) { return channel_mix(v[0], v[1], v[2]); }});
  c.push_back({Op::Stack, {r({2, 3}), r({2, 3})}, [](Tape&, const auto& v) { return stack({v[0], v[1]}); }});
  c.push_back({Op::SoftmaxSources, {r({2, 2, 3})}, [](Tape&, const auto& v) { return softmax_sources(v[0]); }});
  c.push_back({Op::Select, {r({2, 2, 3})}, [](Tape&, const auto& v) { return select(v[0], 1); }});
  c.push_back({Op::Segment, {r({10})}, [](Tape&, const auto& v) { return segment(v[0], 3, {2, 3}); }});
  c.push_back({Op::CropLast, {r({2, 6})}, [](Tape&, const auto& v) { return crop_last(v[0], 4); }});
  return c;
}

// ---------------------------------------------------------------------------
// Separator loss gradient checks

enum class LossKind { Supervised, RemixIT, Re2Re, Re2ReReg };

const char* loss_label(LossKind k) {
  switch (k) {
    case LossKind::Supervised: return "supervised";
    case LossKind::RemixIT: return "remixit";
    case LossKind::Re2Re: return "re2re";
    case LossKind::Re2ReReg: return "re2re_reg";
  }
  return "?";
}

}  // namespace

GradientCheck check_gradient(const ScalarFn& fn, const std::vector<Tensor>& leaves, std::size_t wrt, Rng& rng,
                             const GradientProbeOptions& options) {
  require(wrt < leaves.size(), "check_gradient: leaf index out of range");
  Tape tape;
  if (options.fault_op) tape.inject_gradient_fault(*options.fault_op, options.fault_factor);
  std::vector<Var> vars;
  for (std::size_t i = 0; i < leaves.size(); ++i) vars.push_back(tape.leaf(leaves[i], i == wrt));
  const Var root = fn(tape, vars);
  tape.backward(root);
  const std::vector<double> g = tape.grad(vars[wrt]).values();

  GradientCheck out;
  // A probe whose two evaluation points straddle a relu/prelu kink measures a
  // one-sided slope, not the derivative; it is rejected and redrawn.
  auto probe = [&](const std::vector<double>& direction) {
    std::vector<Tensor> plus = leaves;
    std::vector<Tensor> minus = leaves;
    double analytic = 0.0;
    for (std::size_t i = 0; i < direction.size(); ++i) {
      plus[wrt][i] += options.step * direction[i];
      minus[wrt][i] -= options.step * direction[i];
      analytic += g[i] * direction[i];
    }
    const Evaluation hi = evaluate_fn(fn, plus);
    const Evaluation lo = evaluate_fn(fn, minus);
    if (hi.activation_signs != lo.activation_signs) {
      ++out.rejected;
      return false;
    }
    const double numeric = (hi.value - lo.value) / (2.0 * options.step);
    out.max_rel_error = std::max(out.max_rel_error, rel_error(analytic, numeric));
    ++out.probes;
    return true;
  };
  constexpr std::size_t kMaxAttempts = 8;

  const std::size_t n = leaves[wrt].size();
  std::normal_distribution<double> normal;
  for (std::size_t d = 0; d < options.random_directions; ++d) {
    bool accepted = false;
    for (std::size_t attempt = 0; attempt < kMaxAttempts && !accepted; ++attempt) {
      std::vector<double> dir(n);
      double norm = 0.0;
      for (auto& x : dir) {
        x = normal(rng);
        norm += x * x;
      }
      for (auto& x : dir) x /= std::sqrt(norm);
      accepted = probe(dir);
    }
    if (!accepted) out.max_rel_error = std::numeric_limits<double>::infinity();
  }

  double gmax = 0.0;
  for (double x : g) gmax = std::max(gmax, std::abs(x));
  for (auto [begin, end] : options.coordinate_ranges) {
    require(begin < end && end <= n, "check_gradient: coordinate range out of bounds");
    std::vector<std::size_t> order(end - begin);
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = begin + i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return std::abs(g[a]) > std::abs(g[b]); });
    for (std::size_t k = 0; k < std::min(order.size(), kMaxAttempts); ++k) {
      // A coordinate whose derivative is at rounding level carries no signal.
      if (std::abs(g[order[k]]) <= 1e-6 * gmax) break;
      std::vector<double> dir(n, 0.0);
      dir[order[k]] = 1.0;
      if (probe(dir)) break;
    }
  }
  return out;
}

double chi_square_sf_odd(double x, unsigned dof) {
  require(dof % 2 == 1, "chi_square_sf_odd: degrees of freedom must be odd");
  if (x <= 0.0) return 1.0;
  double tail = std::erfc(std::sqrt(x / 2.0));
  double term = std::sqrt(x);  // x^(j - 1/2) / (1 * 3 * ... * (2j - 1))
  double series = 0.0;
  for (unsigned j = 1; j <= (dof - 1) / 2; ++j) {
    series += term;
    term *= x / (2.0 * j + 1.0);
  }
  return tail + std::sqrt(2.0 / std::numbers::pi) * std::exp(-x / 2.0) * series;
}

std::vector<PropertyResult> run_property_suite(const VerifyOptions& options) {
  std::vector<PropertyResult> results;
  auto sub_rng = [&](std::uint64_t stream) { return make_rng(options.seed, 0x7e51f1 + stream); };

  // Decomposition identity on random batches.
  results.push_back(timed("remixit decomposition identity", [&] {
    Rng rng = sub_rng(1);
    double worst = 0.0;
    std::size_t count = 0;
    for (std::size_t rows : {2, 4, 24})
      for (std::size_t length : {16, 160})
        for (int rep = 0; rep < 17; ++rep, ++count) {
          const auto s = gaussian_batch(rows, length, 1.0, rng, Role::Speech);
          const auto teacher = gaussian_batch(rows, length, 1.0, rng, Role::TeacherSpeech);
          const auto student = gaussian_batch(rows, length, 1.0, rng, Role::StudentSpeech);
          worst = std::max(worst, std::abs(decompose_remixit(student, teacher, s).residual));
        }
    return gate(worst, 1e-10, std::to_string(count) + " batches");
  }));

  // Per-op backward rules.
  {
    Rng rng = sub_rng(2);
    for (auto& c : op_cases(rng)) {
      results.push_back(timed("gradient " + std::string(diff::op_name(c.op)), [&] {
        GradientProbeOptions probe;
        probe.random_directions = 4;
        probe.fault_op = options.fault_op;
        probe.fault_factor = options.fault_factor;
        ScalarFn fn = [&c](Tape& tape, const std::vector<Var>& v) { return weighted_sum(tape, c.build(tape, v)); };
        double worst = 0.0;
        for (std::size_t wrt = 0; wrt < c.leaves.size(); ++wrt)
          worst = std::max(worst, check_gradient(fn, c.leaves, wrt, rng, probe).max_rel_error);
        return gate(worst, 1e-6, "op " + std::string(diff::op_name(c.op)));
      }));
    }
  }

  // Separator + loss gradients.
  for (LossKind kind : {LossKind::Supervised, LossKind::RemixIT, LossKind::Re2Re, LossKind::Re2ReReg}) {
    results.push_back(timed(std::string("gradient ") + loss_label(kind) + " loss through separator", [&] {
      Rng rng = sub_rng(10 + static_cast<std::uint64_t>(kind));
      const SeparatorConfig& model = options.model;
      const std::size_t rows = 4;
      const std::size_t length = 480;
      GradientProbeOptions probe;
      probe.fault_op = options.fault_op;
      probe.fault_factor = options.fault_factor;
      for (const auto& seg : param_layout(model)) probe.coordinate_ranges.emplace_back(seg.offset, seg.offset + numel(seg.shape));
      const LossConfig loss;
      double worst = 0.0;
      std::size_t probes = 0;
      std::size_t rejected = 0;
      for (std::size_t point = 0; point < options.gradient_points; ++point) {
        const ParamVector theta = init_params(model, rng);
        const ParamVector teacher_theta = init_params(model, rng);
        const auto s = gaussian_batch(rows, length, 0.3, rng, Role::Speech);
        const auto n = gaussian_batch(rows, length, 0.3, rng, Role::Noise);
        const auto x = mix(s, n);
        auto [ts, tn] = separate(teacher_theta, x);
        const PermutationPair pair = sample_pair(rows, rng);
        const auto [first, second] = bootstrap_pair(ts, tn, pair);
        const SignalBatch input = kind == LossKind::Supervised ? x : first;
        ScalarFn fn = [&, kind](Tape& tape, const std::vector<Var>& v) -> Var {
          const auto out = forward(model, tape.constant(input.to_tensor()), v[0]);
          switch (kind) {
            case LossKind::Supervised:
              return supervised_loss(out.speech, out.noise, s, n, loss.supervised_metric);
            case LossKind::RemixIT:
              return remixit_loss(out.speech, out.noise, ts, tn, pair.p, loss.remixit_metric);
            case LossKind::Re2Re:
              return re2re_loss(out.speech, second);
            case LossKind::Re2ReReg:
              return re2re_reg_loss(out.speech, out.noise, ts, tn, pair, second, loss.beta, loss.remixit_metric);
          }
          throw ValidationError("unreachable");
        };
        const GradientCheck gc = check_gradient(fn, {Tensor({theta.size()}, theta.values())}, 0, rng, probe);
        worst = std::max(worst, gc.max_rel_error);
        probes += gc.probes;
        rejected += gc.rejected;
      }
      return gate(worst, 1e-4,
                  std::to_string(options.gradient_points) + " parameter points, " + std::to_string(probes) +
                      " probes, " + std::to_string(rejected) + " kink-straddling probes redrawn, h=1e-5");
    }));
  }

  // Adjointness of the convolution pair.
  results.push_back(timed("conv1d / conv1d_transposed adjointness", [&] {
    Rng rng = sub_rng(20);
    std::uniform_int_distribution<std::size_t> small(1, 6);
    double worst = 0.0;
    for (int rep = 0; rep < 20; ++rep) {
      kernels::ConvGeometry g;
      g.batch = small(rng);
      g.filters = small(rng);
      g.taps = small(rng);
      g.stride = small(rng);
      g.length = g.taps + std::uniform_int_distribution<std::size_t>(0, 40)(rng);
      const Tensor a = random_tensor({g.batch, g.length}, rng);
      const Tensor k = random_tensor({g.filters, g.taps}, rng);
      const Tensor b = random_tensor({g.batch, g.filters, g.frames()}, rng);
      std::vector<double> ca(b.size()), tb(a.size());
      kernels::conv1d(g, a.data(), k.data(), ca);
      kernels::conv1d_transposed(g, b.data(), k.data(), tb);
      worst = std::max(worst, rel_error(dot(ca, b.data()), dot(a.data(), tb)));
    }
    return gate(worst, 1e-12, "20 random geometries");
  }));

  results.push_back(timed("serial and parallel kernels agree", [&] {
    Rng rng = sub_rng(21);
    kernels::ConvGeometry g{3, 400, 16, 9, 4};
    const Tensor a = random_tensor({g.batch, g.length}, rng);
    const Tensor k = random_tensor({g.filters, g.taps}, rng);
    const Tensor f = random_tensor({g.batch, g.filters, g.frames()}, rng);
    std::size_t mismatches = 0;
    auto cmp = [&](const std::vector<double>& x, const std::vector<double>& y) { mismatches += (x != y); };
    std::vector<double> p1(f.size()), s1(f.size()), p2(a.size()), s2(a.size()), p3(k.size()), s3(k.size());
    kernels::conv1d(g, a.data(), k.data(), p1);
    kernels::serial::conv1d(g, a.data(), k.data(), s1);
    kernels::conv1d_transposed(g, f.data(), k.data(), p2);
    kernels::serial::conv1d_transposed(g, f.data(), k.data(), s2);
    kernels::conv1d_kernel_grad(g, a.data(), f.data(), p3);
    kernels::serial::conv1d_kernel_grad(g, a.data(), f.data(), s3);
    cmp(p1, s1);
    cmp(p2, s2);
    cmp(p3, s3);
    kernels::MixGeometry m{3, 16, 12, 50};
    const Tensor h = random_tensor({m.batch, m.in_channels, m.frames}, rng);
    const Tensor w = random_tensor({m.out_channels, m.in_channels}, rng);
    const Tensor bias = random_tensor({m.out_channels}, rng);
    std::vector<double> p4(m.batch * m.out_channels * m.frames), s4(p4.size());
    kernels::channel_mix(m, h.data(), w.data(), bias.data(), p4);
    kernels::serial::channel_mix(m, h.data(), w.data(), bias.data(), s4);
    cmp(p4, s4);
    return gate(static_cast<double>(mismatches), 0.5, "mismatching kernels");
  }));

  // SI-SDR semantics.
  results.push_back(timed("si-sdr hand cases and scale invariance", [&] {
    const std::vector<double> s{1.0, 0.0};
    double worst = std::abs(si_sdr(std::vector<double>{1.0, 1.0}, s));
    worst = std::max(worst, std::abs(si_sdr(std::vector<double>{2.0, 2.0}, s)));
    Rng rng = sub_rng(30);
    const auto est = gaussian_batch(1, 64, 1.0, rng, Role::StudentSpeech);
    const auto ref = gaussian_batch(1, 64, 1.0, rng, Role::Speech);
    const double base = si_sdr(est.row(0), ref.row(0));
    for (double c : {0.1, 2.0, 1000.0}) {
      std::vector<double> scaled(est.row(0).begin(), est.row(0).end());
      for (auto& v : scaled) v *= c;
      worst = std::max(worst, std::abs(si_sdr(scaled, ref.row(0)) - base));
    }
    PropertyResult r = gate(worst, 1e-9, "0 dB cases, c in {0.1, 2, 1000}");
    r.passed = r.passed && is_perfect(si_sdr(s, s));
    Tape tape;
    const Var a = tape.leaf(ref.to_tensor());
    const Var loss = neg_si_sdr_loss(a, tape.constant(ref.to_tensor()));
    r.passed = r.passed && std::isfinite(loss.value().item());
    return r;
  }));

  // Permutation statistics.
  results.push_back(timed("permutation uniformity B=3 (chi-square)", [&] {
    Rng rng = sub_rng(40);
    std::map<std::vector<std::size_t>, std::size_t> counts;
    const std::size_t draws = 60000;
    for (std::size_t i = 0; i < draws; ++i) ++counts[sample_permutation(3, rng).map()];
    double chi2 = 0.0;
    const double expected = draws / 6.0;
    for (const auto& [perm, k] : counts) chi2 += (k - expected) * (k - expected) / expected;
    chi2 += expected * static_cast<double>(6 - counts.size());
    const double p = chi_square_sf_odd(chi2, 5);
    PropertyResult r;
    r.measured = p;
    r.tolerance = 1e-3;
    r.passed = p > 1e-3 && counts.size() == 6;
    r.detail = "p-value (must exceed tolerance), chi2=" + std::to_string(chi2);
    return r;
  }));

  results.push_back(timed("discordant sampler B=3 derangement frequencies", [&] {
    Rng rng = sub_rng(41);
    const Permutation id = Permutation::identity(3);
    std::size_t first = 0, second = 0, other = 0;
    const std::size_t draws = 10000;
    for (std::size_t i = 0; i < draws; ++i) {
      const auto q = sample_discordant(id, rng).map();
      if (q == std::vector<std::size_t>{1, 2, 0}) ++first;
      else if (q == std::vector<std::size_t>{2, 0, 1}) ++second;
      else ++other;
    }
    const double dev = std::max(std::abs(first / double(draws) - 0.5), std::abs(second / double(draws) - 0.5));
    PropertyResult r = gate(dev, 0.02, "max |freq - 0.5|");
    r.passed = r.passed && other == 0;
    return r;
  }));

  results.push_back(timed("discordance on 1e5 pairs B=24", [&] {
    Rng rng = sub_rng(42);
    std::size_t violations = 0;
    for (int i = 0; i < 100000; ++i) violations += !sample_pair(24, rng).discordant();
    return gate(static_cast<double>(violations), 0.5, "violating pairs");
  }));

  // Linear-model N2N equivalence with an oracle teacher.
  auto wiener = [&](double teacher_error_sd, std::uint64_t stream) {
    Rng rng = sub_rng(stream);
    const std::size_t rows = 100, length = 1000;
    const auto s = gaussian_batch(rows, length, 1.0, rng, Role::Speech);
    const auto n = gaussian_batch(rows, length, 1.0, rng, Role::Noise);
    SignalBatch ts = s.with_role(Role::TeacherSpeech);
    SignalBatch tn = n.with_role(Role::TeacherNoise);
    if (teacher_error_sd > 0.0) {
      // Leak part of the noise into the speech estimate; consistency kept.
      std::normal_distribution<double> g(0.0, teacher_error_sd);
      for (std::size_t i = 0; i < ts.samples().size(); ++i) {
        const double e = g(rng);
        ts.samples()[i] += e;
        tn.samples()[i] -= e;
      }
    }
    const PermutationPair pair = sample_pair(rows, rng);
    const auto [first, second] = bootstrap_pair(ts, tn, pair);
    // The loss is quadratic in the gain; two gradient evaluations give its minimizer.
    auto grad_at = [&](double w) {
      Tape tape;
      const Var gain = tape.leaf(Tensor::scalar(w));
      const Var est = diff::mul(tape.constant(first.to_tensor()), gain);
      tape.backward(re2re_loss(est, second));
      return tape.grad(gain).item();
    };
    const double g0 = grad_at(0.0);
    const double g1 = grad_at(1.0);
    return -g0 / (g1 - g0);
  };
  results.push_back(timed("re2re single-gain student recovers the Wiener gain", [&] {
    const double w = wiener(0.0, 50);
    return gate(std::abs(w - 0.5) / 0.5, 0.05, "gain " + std::to_string(w) + " vs 0.5, N=1e5");
  }));
  results.push_back(timed("re2re single-gain student, perturbed teacher (report only)", [&] {
    const double w = wiener(0.3, 51);
    PropertyResult r;
    r.measured = std::abs(w - 0.5) / 0.5;
    r.tolerance = 0.05;
    r.passed = true;
    r.gated = false;
    r.detail = "gain " + std::to_string(w) + " with teacher error sd 0.3";
    return r;
  }));

  // WMA contraction.
  results.push_back(timed("wma geometric contraction (gamma=0.01, 100 steps)", [&] {
    Rng rng = sub_rng(60);
    const ParamVector student = init_params(options.model, rng);
    ParamVector teacher = init_params(options.model, rng);
    auto dist = [&](const ParamVector& t) {
      double ss = 0.0;
      for (std::size_t i = 0; i < t.size(); ++i) ss += (t[i] - student[i]) * (t[i] - student[i]);
      return std::sqrt(ss);
    };
    const double d0 = dist(teacher);
    double worst = 0.0;
    for (int k = 1; k <= 100; ++k) {
      teacher = wma_update(teacher, student, 0.01);
      worst = std::max(worst, rel_error(dist(teacher), std::pow(0.99, k) * d0));
    }
    return gate(worst, 1e-12, "relative deviation from (1-gamma)^k");
  }));

  // Separator structure.
  results.push_back(timed("separator mixture consistency and row independence", [&] {
    Rng rng = sub_rng(70);
    const ParamVector theta = init_params(options.model, rng);
    const auto x = gaussian_batch(3, 123, 0.3, rng, Role::Mixture);
    const auto [s, n] = separate(theta, x);
    double consistency = 0.0;
    for (std::size_t i = 0; i < x.samples().size(); ++i)
      consistency = std::max(consistency, std::abs(s.samples()[i] + n.samples()[i] - x.samples()[i]));
    double rows = 0.0;
    for (std::size_t b = 0; b < x.rows(); ++b) {
      const SignalBatch one(1, x.length(), std::vector<double>(x.row(b).begin(), x.row(b).end()));
      const auto [s1, n1] = separate(theta, one);
      for (std::size_t t = 0; t < x.length(); ++t) rows = std::max(rows, std::abs(s1.row(0)[t] - s.row(b)[t]));
    }
    const bool consistent_mode = options.model.mask_mode == MaskMode::SoftmaxConsistent;
    PropertyResult r = gate(std::max(consistent_mode ? consistency : 0.0, rows), 1e-12,
                            "max |s + n - x| and max row deviation");
    return r;
  }));

  return results;
}

bool all_passed(const std::vector<PropertyResult>& results) {
  return std::all_of(results.begin(), results.end(), [](const PropertyResult& r) { return r.passed || !r.gated; });
}

std::string format_results(const std::vector<PropertyResult>& results) {
  std::string out;
  char line[512];
  std::size_t failed = 0;
  for (const auto& r : results) {
    const char* tag = !r.gated ? "INFO" : (r.passed ? "PASS" : "FAIL");
    if (r.gated && !r.passed) ++failed;
    std::snprintf(line, sizeof line, "%s  %-58s measured=%-12.4g tol=%-9.3g %6.2fs  %s\n", tag, r.name.c_str(),
                  r.measured, r.tolerance, r.seconds, r.detail.c_str());
    out += line;
  }
  std::snprintf(line, sizeof line, "%zu properties, %zu failed\n", results.size(), failed);
  out += line;
  return out;
}

}  // namespace re2re
