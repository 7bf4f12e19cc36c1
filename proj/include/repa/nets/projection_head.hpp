#pragma once
// Projection head g_phi: D2 -> D1, applied row-wise to patch tokens.
// Perceptron mode: gelu(h W1 + b1) W2 + b2. Linear mode: h -> Phi h exactly.

#include "repa/nets/params.hpp"

namespace repa::nets {

struct HeadConfig {
  std::size_t input_dim = 64;
  std::size_t output_dim = 32;
  std::size_t hidden = 128;
  bool linear = false;
};

class ProjectionHead {
 public:
  ProjectionHead(const HeadConfig& config, std::uint64_t seed);
  // Linear head with the given Phi [D1, D2].
  static ProjectionHead linear_map(const Tensor& phi);

  const HeadConfig& config() const noexcept { return config_; }
  ParameterSet& params() noexcept { return params_; }
  const ParameterSet& params() const noexcept { return params_; }

  // h: [R, D2] -> [R, D1].
  Var forward(const Binding& binding, Var h) const;
  Tensor project(const Tensor& h) const;
  // Phi [D1, D2]; linear mode only.
  Tensor phi() const;

 private:
  HeadConfig config_;
  ParameterSet params_;
  Dense first_, second_;
  std::size_t phi_t_ = 0;  // stores Phi^T [D2, D1]
};

}  // namespace repa::nets
