#include <cmath>

#include "re2re/error.hpp"
#include "re2re/trainer.hpp"

namespace re2re {

Adam::Adam(std::size_t size, double lr, AdamConfig config) : lr_(lr), config_(config) {
  moments_.first.assign(size, 0.0);
  moments_.second.assign(size, 0.0);
}

Adam::Adam(AdamMoments moments, double lr, AdamConfig config)
    : moments_(std::move(moments)), lr_(lr), config_(config) {
  require(moments_.first.size() == moments_.second.size(), "Adam: moment vectors differ in length");
}

ParamVector Adam::step(const ParamVector& params, const std::vector<double>& grad) {
  require(grad.size() == params.size() && moments_.first.size() == params.size(),
          "Adam: gradient/moment size does not match the parameters");
  ++moments_.steps;
  const double t = static_cast<double>(moments_.steps);
  const double correct1 = 1.0 - std::pow(config_.beta1, t);
  const double correct2 = 1.0 - std::pow(config_.beta2, t);
  std::vector<double> next(params.values());
  auto& m = moments_.first;
  auto& v = moments_.second;
  for (std::size_t i = 0; i < next.size(); ++i) {
    m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * grad[i];
    v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * grad[i] * grad[i];
    next[i] -= lr_ * (m[i] / correct1) / (std::sqrt(v[i] / correct2) + config_.eps);
  }
  return ParamVector(params.config(), std::move(next));
}

}  // namespace re2re
