#include <algorithm>
#include <cmath>

#include "re2re/error.hpp"
#include "re2re/kernels.hpp"
#include "re2re/tape.hpp"

namespace re2re::diff {

namespace {

Tape& tape_of(Var a) {
  require(a.tape != nullptr, "Var is not bound to a tape");
  return *a.tape;
}

Tape& tape_of(Var a, Var b) {
  require(a.tape != nullptr && a.tape == b.tape, "operands live on different tapes");
  return *a.tape;
}

void check_broadcast(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() == b.shape() || b.size() == 1) return;
  if (b.rank() == 1 && b.dim(0) == a.shape().back()) return;
  throw ValidationError(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " + to_string(b.shape()));
}

template <typename F>
Var binary(Op op, const char* name, Var a, Var b, F f) {
  Tape& tape = tape_of(a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  check_broadcast(name, x, y);
  Tensor out(x.shape());
  const std::size_t bs = y.size();
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = f(x[i], y[bs == 1 ? 0 : i % bs]);
  return tape.push(op, {a.id, b.id}, std::move(out));
}

template <typename F>
Var unary(Op op, Var a, F f, NodeAttrs attrs = {}) {
  Tape& tape = tape_of(a);
  const Tensor& x = a.value();
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = f(x[i]);
  return tape.push(op, {a.id}, std::move(out), attrs);
}

}  // namespace

Var add(Var a, Var b) { return binary(Op::Add, "add", a, b, [](double x, double y) { return x + y; }); }
Var sub(Var a, Var b) { return binary(Op::Sub, "sub", a, b, [](double x, double y) { return x - y; }); }
Var mul(Var a, Var b) { return binary(Op::Mul, "mul", a, b, [](double x, double y) { return x * y; }); }

Var div(Var a, Var b) {
  for (double d : b.value().data()) require(d != 0.0, "div: division by zero");
  return binary(Op::Div, "div", a, b, [](double x, double y) { return x / y; });
}

Var scale(Var a, double c) {
  NodeAttrs attrs;
  attrs.scalar = c;
  return unary(Op::Scale, a, [c](double x) { return c * x; }, attrs);
}

Var shift(Var a, double c) {
  NodeAttrs attrs;
  attrs.scalar = c;
  return unary(Op::Shift, a, [c](double x) { return x + c; }, attrs);
}

Var relu(Var a) { return unary(Op::Relu, a, [](double x) { return x > 0.0 ? x : 0.0; }); }

Var prelu(Var a, Var slope) {
  Tape& tape = tape_of(a, slope);
  require(slope.value().size() == 1, "prelu: slope must be a single value");
  const double s = slope.value()[0];
  const Tensor& x = a.value();
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] > 0.0 ? x[i] : s * x[i];
  return tape.push(Op::Prelu, {a.id, slope.id}, std::move(out));
}

Var sigmoid(Var a) {
  return unary(Op::Sigmoid, a, [](double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
  });
}

Var log10(Var a) {
  for (double x : a.value().data()) require(x > 0.0, "log10: argument must be positive");
  return unary(Op::Log10, a, [](double x) { return std::log10(x); });
}

Var square(Var a) { return unary(Op::Square, a, [](double x) { return x * x; }); }

Var sqrt(Var a) {
  for (double x : a.value().data()) require(x > 0.0, "sqrt: argument must be positive");
  return unary(Op::Sqrt, a, [](double x) { return std::sqrt(x); });
}

Var sum(Var a) {
  double acc = 0.0;
  for (double x : a.value().data()) acc += x;
  return tape_of(a).push(Op::Sum, {a.id}, Tensor::scalar(acc));
}

Var mean(Var a) {
  double acc = 0.0;
  for (double x : a.value().data()) acc += x;
  return tape_of(a).push(Op::Mean, {a.id}, Tensor::scalar(acc / static_cast<double>(a.value().size())));
}

Var sum_rows(Var a) {
  const Tensor& x = a.value();
  require(x.rank() == 2, "sum_rows expects [B, T], got " + to_string(x.shape()));
  const std::size_t rows = x.dim(0), cols = x.dim(1);
  Tensor out({rows});
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = 0.0;
    for (std::size_t t = 0; t < cols; ++t) acc += x[r * cols + t];
    out[r] = acc;
  }
  return tape_of(a).push(Op::SumRows, {a.id}, std::move(out));
}

Var scale_rows(Var a, Var row_scale) {
  Tape& tape = tape_of(a, row_scale);
  const Tensor& x = a.value();
  const Tensor& r = row_scale.value();
  require(x.rank() == 2 && r.rank() == 1 && r.dim(0) == x.dim(0),
          "scale_rows: shape mismatch " + to_string(x.shape()) + " vs " + to_string(r.shape()));
  const std::size_t cols = x.dim(1);
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * r[i / cols];
  return tape.push(Op::ScaleRows, {a.id, row_scale.id}, std::move(out));
}

Var conv1d(Var signal, Var kernels, std::size_t stride) {
  Tape& tape = tape_of(signal, kernels);
  const Tensor& x = signal.value();
  const Tensor& w = kernels.value();
  require(x.rank() == 2 && w.rank() == 2, "conv1d expects signal [B, T] and kernels [F, K]");
  require(stride >= 1, "conv1d: stride must be positive");
  const kernels::ConvGeometry geo{x.dim(0), x.dim(1), w.dim(0), w.dim(1), stride};
  require(geo.length >= geo.taps, "conv1d: signal length " + std::to_string(geo.length) + " shorter than kernel " +
                                      std::to_string(geo.taps));
  Tensor out({geo.batch, geo.filters, geo.frames()});
  kernels::conv1d(geo, x.data(), w.data(), out.data());
  NodeAttrs attrs;
  attrs.stride = stride;
  return tape.push(Op::Conv1d, {signal.id, kernels.id}, std::move(out), attrs);
}

Var conv1d_transposed(Var features, Var kernels, std::size_t stride, std::size_t length) {
  Tape& tape = tape_of(features, kernels);
  const Tensor& f = features.value();
  const Tensor& w = kernels.value();
  require(f.rank() == 3 && w.rank() == 2, "conv1d_transposed expects features [B, F, T'] and kernels [F, K]");
  require(stride >= 1, "conv1d_transposed: stride must be positive");
  require(f.dim(1) == w.dim(0), "conv1d_transposed: feature channels " + std::to_string(f.dim(1)) +
                                    " do not match kernel filters " + std::to_string(w.dim(0)));
  const kernels::ConvGeometry geo{f.dim(0), length, w.dim(0), w.dim(1), stride};
  require(length >= geo.taps && geo.frames() == f.dim(2),
          "conv1d_transposed: " + std::to_string(f.dim(2)) + " frames inconsistent with output length " +
              std::to_string(length));
  Tensor out({geo.batch, length});
  kernels::conv1d_transposed(geo, f.data(), w.data(), out.data());
  NodeAttrs attrs;
  attrs.stride = stride;
  return tape.push(Op::Conv1dTransposed, {features.id, kernels.id}, std::move(out), attrs);
}

Var channel_mix(Var features, Var weights, Var bias) {
  Tape& tape = tape_of(features, weights);
  require(bias.tape == features.tape, "operands live on different tapes");
  const Tensor& h = features.value();
  const Tensor& w = weights.value();
  const Tensor& b = bias.value();
  require(h.rank() == 3 && w.rank() == 2 && w.dim(1) == h.dim(1) && b.size() == w.dim(0),
          "channel_mix: shape mismatch " + to_string(h.shape()) + ", " + to_string(w.shape()) + ", " +
              to_string(b.shape()));
  const kernels::MixGeometry geo{h.dim(0), h.dim(1), w.dim(0), h.dim(2)};
  Tensor out({geo.batch, geo.out_channels, geo.frames});
  kernels::channel_mix(geo, h.data(), w.data(), b.data(), out.data());
  return tape.push(Op::ChannelMix, {features.id, weights.id, bias.id}, std::move(out));
}

Var stack(const std::vector<Var>& parts) {
  require(!parts.empty(), "stack: nothing to stack");
  Tape& tape = tape_of(parts.front());
  const Shape& shape = parts.front().shape();
  Shape out_shape{parts.size()};
  out_shape.insert(out_shape.end(), shape.begin(), shape.end());
  std::vector<double> data;
  data.reserve(numel(out_shape));
  std::vector<std::size_t> ids;
  for (const Var& p : parts) {
    require(p.tape == &tape, "stack: operands live on different tapes");
    require(p.shape() == shape, "stack: shape mismatch");
    data.insert(data.end(), p.value().data().begin(), p.value().data().end());
    ids.push_back(p.id);
  }
  return tape.push(Op::Stack, std::move(ids), Tensor(std::move(out_shape), std::move(data)));
}

Var softmax_sources(Var logits) {
  const Tensor& x = logits.value();
  require(x.rank() >= 2, "softmax_sources expects a leading source axis");
  const std::size_t sources = x.dim(0);
  const std::size_t part = x.size() / sources;
  Tensor out(x.shape());
  for (std::size_t j = 0; j < part; ++j) {
    double peak = x[j];
    for (std::size_t s = 1; s < sources; ++s) peak = std::max(peak, x[s * part + j]);
    double total = 0.0;
    for (std::size_t s = 0; s < sources; ++s) {
      out[s * part + j] = std::exp(x[s * part + j] - peak);
      total += out[s * part + j];
    }
    for (std::size_t s = 0; s < sources; ++s) out[s * part + j] /= total;
  }
  return tape_of(logits).push(Op::SoftmaxSources, {logits.id}, std::move(out));
}

Var select(Var a, std::size_t index) {
  const Tensor& x = a.value();
  require(x.rank() >= 2 && index < x.dim(0), "select: index out of range");
  Shape shape(x.shape().begin() + 1, x.shape().end());
  const std::size_t part = numel(shape);
  std::vector<double> data(x.data().begin() + static_cast<std::ptrdiff_t>(index * part),
                           x.data().begin() + static_cast<std::ptrdiff_t>((index + 1) * part));
  NodeAttrs attrs;
  attrs.index = index;
  return tape_of(a).push(Op::Select, {a.id}, Tensor(std::move(shape), std::move(data)), attrs);
}

Var segment(Var flat, std::size_t offset, Shape shape) {
  const Tensor& x = flat.value();
  const std::size_t n = numel(shape);
  require(offset + n <= x.size(), "segment: out of range");
  std::vector<double> data(x.data().begin() + static_cast<std::ptrdiff_t>(offset),
                           x.data().begin() + static_cast<std::ptrdiff_t>(offset + n));
  NodeAttrs attrs;
  attrs.offset = offset;
  return tape_of(flat).push(Op::Segment, {flat.id}, Tensor(std::move(shape), std::move(data)), attrs);
}

Var crop_last(Var a, std::size_t length) {
  const Tensor& x = a.value();
  const std::size_t full = x.shape().back();
  require(length >= 1 && length <= full, "crop_last: length out of range");
  Shape shape = x.shape();
  shape.back() = length;
  const std::size_t rows = x.size() / full;
  std::vector<double> data(rows * length);
  for (std::size_t r = 0; r < rows; ++r)
    std::copy_n(x.data().begin() + static_cast<std::ptrdiff_t>(r * full), length,
                data.begin() + static_cast<std::ptrdiff_t>(r * length));
  return tape_of(a).push(Op::CropLast, {a.id}, Tensor(std::move(shape), std::move(data)));
}

}  // namespace re2re::diff
