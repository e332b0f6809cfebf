#include "re2re/tensor.hpp"

#include <functional>
#include <numeric>
#include <sstream>

#include "re2re/error.hpp"
#include "re2re/rng.hpp"

namespace re2re {

std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string to_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) out << (i ? "x" : "") << shape[i];
  out << ']';
  return out.str();
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  require(!shape_.empty(), "tensor shape must have at least one axis");
  require(numel(shape_) == data_.size(),
          "tensor shape " + to_string(shape_) + " does not match " + std::to_string(data_.size()) + " values");
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  require(!shape_.empty(), "tensor shape must have at least one axis");
  data_.assign(numel(shape_), fill);
}

Tensor Tensor::vector(std::initializer_list<double> values) {
  return Tensor({values.size()}, std::vector<double>(values));
}

double Tensor::item() const {
  require(data_.size() == 1, "item() needs a single-element tensor, got " + to_string(shape_));
  return data_[0];
}

Tensor Tensor::reshaped(Shape shape) const { return Tensor(std::move(shape), data_); }

double dot(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), "dot: length mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

std::string serialize_rng(const Rng& rng) {
  std::ostringstream out;
  out << rng;
  return out.str();
}

Rng deserialize_rng(const std::string& text) {
  std::istringstream in(text);
  Rng rng;
  in >> rng;
  if (in.fail()) throw ValidationError("corrupt RNG state");
  return rng;
}

}  // namespace re2re
