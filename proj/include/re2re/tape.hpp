#pragma once

#include <cstddef>
#include <optional>
#include <string_view>
#include <vector>

#include "re2re/tensor.hpp"

namespace re2re::diff {

enum class Op {
  Leaf,
  Add,
  Sub,
  Mul,
  Div,
  Scale,
  Shift,
  Relu,
  Prelu,
  Sigmoid,
  Log10,
  Square,
  Sqrt,
  Sum,
  Mean,
  SumRows,
  ScaleRows,
  Conv1d,
  Conv1dTransposed,
  ChannelMix,
  Stack,
  SoftmaxSources,
  Select,
  Segment,
  CropLast,
};

std::string_view op_name(Op op);
std::optional<Op> op_from_name(std::string_view name);

class Tape;

/// Per-node constants saved for the backward pass.
struct NodeAttrs {
  double scalar = 0.0;
  std::size_t stride = 1;
  std::size_t offset = 0;
  std::size_t index = 0;
};

/// Handle to a node on a tape. Cheap to copy; valid as long as the tape lives.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
};

/// Reverse-mode tape. Nodes are appended in creation order and never removed;
/// backward() walks them once in reverse. One tape per thread.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor value, bool requires_grad = true);
  Var constant(Tensor value) { return leaf(std::move(value), false); }

  /// Fills gradients of every node reachable from `root`. Root must be scalar.
  void backward(Var root);

  /// Gradient accumulated at `v` by the last backward(). Zeros when `v` did
  /// not influence the root.
  Tensor grad(Var v) const;

  bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }
  Op op(Var v) const { return nodes_.at(v.id).op; }
  const Tensor& value(std::size_t id) const { return nodes_.at(id).value; }
  std::size_t size() const { return nodes_.size(); }

  /// Test hook: scales every input-gradient produced by nodes of kind `op`.
  /// Used to prove the gradient checks notice a broken backward rule.
  void inject_gradient_fault(Op op, double factor) {
    fault_op_ = op;
    fault_factor_ = factor;
  }

  Var push(Op op, std::vector<std::size_t> inputs, Tensor value, NodeAttrs attrs = {});

 private:
  struct Node {
    Op op = Op::Leaf;
    std::vector<std::size_t> inputs;
    Tensor value;
    Tensor grad;
    NodeAttrs attrs;
    bool requires_grad = false;
  };

  void propagate(const Node& node);
  Tensor& grad_slot(std::size_t id);

  std::vector<Node> nodes_;
  std::optional<Op> fault_op_;
  double fault_factor_ = 1.0;
};

// Elementwise. `b` may match `a`, be a single value, or be 1-D matching a's last axis.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);

Var scale(Var a, double c);
Var shift(Var a, double c);
Var relu(Var a);
Var prelu(Var a, Var slope);
Var sigmoid(Var a);
Var log10(Var a);
Var square(Var a);
Var sqrt(Var a);

Var sum(Var a);
Var mean(Var a);
/// [B, T] -> [B]
Var sum_rows(Var a);
/// [B, T] * [B] -> [B, T]
Var scale_rows(Var a, Var row_scale);

/// [B, T] (x) [F, K] -> [B, F, (T - K) / stride + 1], cross-correlation.
Var conv1d(Var signal, Var kernels, std::size_t stride);
/// Adjoint of conv1d: [B, F, T'] (x) [F, K] -> [B, length].
Var conv1d_transposed(Var features, Var kernels, std::size_t stride, std::size_t length);
/// Pointwise mixing across the channel axis: [B, C, T] with [G, C], [G] -> [B, G, T].
Var channel_mix(Var features, Var weights, Var bias);

/// Stacks equally shaped tensors along a new leading axis.
Var stack(const std::vector<Var>& parts);
/// Softmax over the leading (source) axis.
Var softmax_sources(Var logits);
/// Slice `index` of the leading axis.
Var select(Var a, std::size_t index);
/// Contiguous block of a flat tensor, reshaped.
Var segment(Var flat, std::size_t offset, Shape shape);
/// Keeps the first `length` entries of the last axis.
Var crop_last(Var a, std::size_t length);

}  // namespace re2re::diff
