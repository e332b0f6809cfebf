#include <array>
#include <cmath>
#include <numbers>
#include <utility>

#include "re2re/error.hpp"
#include "re2re/kernels.hpp"
#include "re2re/tape.hpp"

namespace re2re::diff {

namespace {

constexpr std::array kOpNames = {
    std::pair{Op::Leaf, "leaf"},
    std::pair{Op::Add, "add"},
    std::pair{Op::Sub, "sub"},
    std::pair{Op::Mul, "mul"},
    std::pair{Op::Div, "div"},
    std::pair{Op::Scale, "scale"},
    std::pair{Op::Shift, "shift"},
    std::pair{Op::Relu, "relu"},
    std::pair{Op::Prelu, "prelu"},
    std::pair{Op::Sigmoid, "sigmoid"},
    std::pair{Op::Log10, "log10"},
    std::pair{Op::Square, "square"},
    std::pair{Op::Sqrt, "sqrt"},
    std::pair{Op::Sum, "sum"},
    std::pair{Op::Mean, "mean"},
    std::pair{Op::SumRows, "sum_rows"},
    std::pair{Op::ScaleRows, "scale_rows"},
    std::pair{Op::Conv1d, "conv1d"},
    std::pair{Op::Conv1dTransposed, "conv1d_transposed"},
    std::pair{Op::ChannelMix, "channel_mix"},
    std::pair{Op::Stack, "stack"},
    std::pair{Op::SoftmaxSources, "softmax_sources"},
    std::pair{Op::Select, "select"},
    std::pair{Op::Segment, "segment"},
    std::pair{Op::CropLast, "crop_last"},
};

// Index of the broadcast partner element for flat index i of the larger operand.
inline std::size_t partner(std::size_t i, std::size_t b_size) { return b_size == 1 ? 0 : i % b_size; }

void accumulate(Tensor& dst, const Tensor& src) {
  auto d = dst.data();
  auto s = src.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

}  // namespace

std::string_view op_name(Op op) {
  for (const auto& [o, name] : kOpNames)
    if (o == op) return name;
  return "unknown";
}

std::optional<Op> op_from_name(std::string_view name) {
  for (const auto& [o, n] : kOpNames)
    if (n == name) return o;
  return std::nullopt;
}

const Tensor& Var::value() const {
  require(tape != nullptr, "Var is not bound to a tape");
  return tape->value(id);
}

Var Tape::leaf(Tensor value, bool requires_grad) {
  Node node;
  node.op = Op::Leaf;
  node.value = std::move(value);
  node.requires_grad = requires_grad;
  nodes_.push_back(std::move(node));
  return Var{this, nodes_.size() - 1};
}

Var Tape::push(Op op, std::vector<std::size_t> inputs, Tensor value, NodeAttrs attrs) {
  Node node;
  node.op = op;
  node.attrs = attrs;
  for (auto id : inputs) {
    require(id < nodes_.size(), "tape input refers to a future node");
    node.requires_grad = node.requires_grad || nodes_[id].requires_grad;
  }
  node.inputs = std::move(inputs);
  node.value = std::move(value);
  nodes_.push_back(std::move(node));
  return Var{this, nodes_.size() - 1};
}

Tensor& Tape::grad_slot(std::size_t id) {
  Node& node = nodes_[id];
  if (node.grad.size() == 0) node.grad = Tensor(node.value.shape(), 0.0);
  return node.grad;
}

Tensor Tape::grad(Var v) const {
  const Node& node = nodes_.at(v.id);
  if (node.grad.size() == 0) return Tensor(node.value.shape(), 0.0);
  return node.grad;
}

void Tape::backward(Var root) {
  require(root.tape == this, "backward: root belongs to another tape");
  const Node& r = nodes_.at(root.id);
  require(r.value.size() == 1, "backward: root must be scalar, got shape " + to_string(r.value.shape()));
  for (auto& node : nodes_) node.grad = Tensor();
  if (!r.requires_grad) return;
  grad_slot(root.id)[0] = 1.0;
  for (std::size_t id = root.id + 1; id-- > 0;) {
    const Node& node = nodes_[id];
    if (!node.requires_grad || node.grad.size() == 0 || node.op == Op::Leaf) continue;
    propagate(node);
  }
}

void Tape::propagate(const Node& node) {
  Tensor g_scaled;
  const Tensor* gp = &node.grad;
  if (fault_op_ && *fault_op_ == node.op) {
    g_scaled = node.grad;
    for (auto& v : g_scaled.values()) v *= fault_factor_;
    gp = &g_scaled;
  }
  const Tensor& g = *gp;
  const auto& in = node.inputs;
  auto needs = [&](std::size_t k) { return nodes_[in[k]].requires_grad; };
  auto input = [&](std::size_t k) -> const Tensor& { return nodes_[in[k]].value; };

  switch (node.op) {
    case Op::Leaf:
      break;
    case Op::Add:
    case Op::Sub: {
      const double sign = node.op == Op::Add ? 1.0 : -1.0;
      if (needs(0)) accumulate(grad_slot(in[0]), g);
      if (needs(1)) {
        Tensor& gb = grad_slot(in[1]);
        const std::size_t bs = gb.size();
        for (std::size_t i = 0; i < g.size(); ++i) gb[partner(i, bs)] += sign * g[i];
      }
      break;
    }
    case Op::Mul: {
      const Tensor& a = input(0);
      const Tensor& b = input(1);
      const std::size_t bs = b.size();
      if (needs(0)) {
        Tensor& ga = grad_slot(in[0]);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * b[partner(i, bs)];
      }
      if (needs(1)) {
        Tensor& gb = grad_slot(in[1]);
        for (std::size_t i = 0; i < g.size(); ++i) gb[partner(i, bs)] += g[i] * a[i];
      }
      break;
    }
    case Op::Div: {
      const Tensor& a = input(0);
      const Tensor& b = input(1);
      const std::size_t bs = b.size();
      if (needs(0)) {
        Tensor& ga = grad_slot(in[0]);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / b[partner(i, bs)];
      }
      if (needs(1)) {
        Tensor& gb = grad_slot(in[1]);
        for (std::size_t i = 0; i < g.size(); ++i) {
          const double d = b[partner(i, bs)];
          gb[partner(i, bs)] -= g[i] * a[i] / (d * d);
        }
      }
      break;
    }
    case Op::Scale: {
      Tensor& ga = grad_slot(in[0]);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += node.attrs.scalar * g[i];
      break;
    }
    case Op::Shift:
      accumulate(grad_slot(in[0]), g);
      break;
    case Op::Relu: {
      const Tensor& a = input(0);
      Tensor& ga = grad_slot(in[0]);
      for (std::size_t i = 0; i < g.size(); ++i)
        if (a[i] > 0.0) ga[i] += g[i];
      break;
    }
    case Op::Prelu: {
      const Tensor& a = input(0);
      const double slope = input(1)[0];
      if (needs(0)) {
        Tensor& ga = grad_slot(in[0]);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += a[i] > 0.0 ? g[i] : slope * g[i];
      }
      if (needs(1)) {
        double acc = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i)
          if (a[i] <= 0.0) acc += g[i] * a[i];
        grad_slot(in[1])[0] += acc;
      }
      break;
    }
    case Op::Sigmoid: {
      const Tensor& y = node.value;
      Tensor& ga = grad_slot(in[0]);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i] * (1.0 - y[i]);
      break;
    }
    case Op::Log10: {
      const Tensor& a = input(0);
      Tensor& ga = grad_slot(in[0]);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / (a[i] * std::numbers::ln10);
      break;
    }
    case Op::Square: {
      const Tensor& a = input(0);
      Tensor& ga = grad_slot(in[0]);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += 2.0 * a[i] * g[i];
      break;
    }
    case Op::Sqrt: {
      const Tensor& y = node.value;
      Tensor& ga = grad_slot(in[0]);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / (2.0 * y[i]);
      break;
    }
    case Op::Sum:
    case Op::Mean: {
      Tensor& ga = grad_slot(in[0]);
      const double v = node.op == Op::Sum ? g[0] : g[0] / static_cast<double>(ga.size());
      for (auto& x : ga.values()) x += v;
      break;
    }
    case Op::SumRows: {
      Tensor& ga = grad_slot(in[0]);
      const std::size_t cols = ga.dim(1);
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i / cols];
      break;
    }
    case Op::ScaleRows: {
      const Tensor& a = input(0);
      const Tensor& r = input(1);
      const std::size_t cols = a.dim(1);
      if (needs(0)) {
        Tensor& ga = grad_slot(in[0]);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * r[i / cols];
      }
      if (needs(1)) {
        Tensor& gr = grad_slot(in[1]);
        for (std::size_t i = 0; i < g.size(); ++i) gr[i / cols] += g[i] * a[i];
      }
      break;
    }
    case Op::Conv1d: {
      const Tensor& sig = input(0);
      const Tensor& ker = input(1);
      const kernels::ConvGeometry geo{sig.dim(0), sig.dim(1), ker.dim(0), ker.dim(1), node.attrs.stride};
      if (needs(0)) {
        Tensor tmp(sig.shape());
        kernels::conv1d_transposed(geo, g.data(), ker.data(), tmp.data());
        accumulate(grad_slot(in[0]), tmp);
      }
      if (needs(1)) {
        Tensor tmp(ker.shape());
        kernels::conv1d_kernel_grad(geo, sig.data(), g.data(), tmp.data());
        accumulate(grad_slot(in[1]), tmp);
      }
      break;
    }
    case Op::Conv1dTransposed: {
      const Tensor& feat = input(0);
      const Tensor& ker = input(1);
      const kernels::ConvGeometry geo{feat.dim(0), node.value.dim(1), ker.dim(0), ker.dim(1), node.attrs.stride};
      if (needs(0)) {
        Tensor tmp(feat.shape());
        kernels::conv1d(geo, g.data(), ker.data(), tmp.data());
        accumulate(grad_slot(in[0]), tmp);
      }
      if (needs(1)) {
        Tensor tmp(ker.shape());
        kernels::conv1d_kernel_grad(geo, g.data(), feat.data(), tmp.data());
        accumulate(grad_slot(in[1]), tmp);
      }
      break;
    }
    case Op::ChannelMix: {
      const Tensor& h = input(0);
      const Tensor& w = input(1);
      const kernels::MixGeometry geo{h.dim(0), h.dim(1), w.dim(0), h.dim(2)};
      if (needs(0)) {
        Tensor tmp(h.shape());
        kernels::channel_mix_input_grad(geo, w.data(), g.data(), tmp.data());
        accumulate(grad_slot(in[0]), tmp);
      }
      if (needs(1) || needs(2)) {
        Tensor gw(w.shape());
        Tensor gbias(input(2).shape());
        kernels::channel_mix_param_grad(geo, h.data(), g.data(), gw.data(), gbias.data());
        if (needs(1)) accumulate(grad_slot(in[1]), gw);
        if (needs(2)) accumulate(grad_slot(in[2]), gbias);
      }
      break;
    }
    case Op::Stack: {
      const std::size_t part = g.size() / in.size();
      for (std::size_t k = 0; k < in.size(); ++k) {
        if (!needs(k)) continue;
        Tensor& gk = grad_slot(in[k]);
        for (std::size_t i = 0; i < part; ++i) gk[i] += g[k * part + i];
      }
      break;
    }
    case Op::SoftmaxSources: {
      const Tensor& y = node.value;
      Tensor& ga = grad_slot(in[0]);
      const std::size_t sources = y.dim(0);
      const std::size_t part = y.size() / sources;
      for (std::size_t j = 0; j < part; ++j) {
        double inner = 0.0;
        for (std::size_t s = 0; s < sources; ++s) inner += g[s * part + j] * y[s * part + j];
        for (std::size_t s = 0; s < sources; ++s) ga[s * part + j] += y[s * part + j] * (g[s * part + j] - inner);
      }
      break;
    }
    case Op::Select: {
      Tensor& ga = grad_slot(in[0]);
      const std::size_t base = node.attrs.index * g.size();
      for (std::size_t i = 0; i < g.size(); ++i) ga[base + i] += g[i];
      break;
    }
    case Op::Segment: {
      Tensor& ga = grad_slot(in[0]);
      for (std::size_t i = 0; i < g.size(); ++i) ga[node.attrs.offset + i] += g[i];
      break;
    }
    case Op::CropLast: {
      Tensor& ga = grad_slot(in[0]);
      const std::size_t full = ga.shape().back();
      const std::size_t kept = g.shape().back();
      const std::size_t rows = g.size() / kept;
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t t = 0; t < kept; ++t) ga[r * full + t] += g[r * kept + t];
      break;
    }
  }
}

}  // namespace re2re::diff
