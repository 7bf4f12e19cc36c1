#include "repa/train/adam.hpp"

#include <cmath>

#include "repa/errors.hpp"

namespace repa::train {

Adam::Adam(const nets::ParameterSet& params, AdamConfig config) : config_(config) {
  if (!(config.lr > 0.0)) throw ConfigError("adam: lr must be positive");
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_.emplace_back(params.value(i).shape());
    v_.emplace_back(params.value(i).shape());
  }
}

void Adam::step(nets::ParameterSet& params, const std::vector<diffcore::Tensor>& grads) {
  if (grads.size() != params.size() || m_.size() != params.size()) throw ShapeError("adam: gradient count mismatch");
  ++t_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params.trainable(i)) continue;
    auto& p = params.value(i);
    const auto& g = grads[i];
    if (g.shape() != p.shape()) throw ShapeError("adam: gradient shape mismatch for " + params.name(i));
    for (std::size_t k = 0; k < p.size(); ++k) {
      m_[i][k] = b1 * m_[i][k] + (1.0 - b1) * g[k];
      v_[i][k] = b2 * v_[i][k] + (1.0 - b2) * g[k] * g[k];
      p[k] -= config_.lr * (m_[i][k] / c1) / (std::sqrt(v_[i][k] / c2) + config_.eps);
    }
  }
}

}  // namespace repa::train
