#include "repa/nets/projection_head.hpp"

#include <cmath>
#include <string>

#include "repa/diffcore/ops.hpp"
#include "repa/errors.hpp"

namespace repa::nets {

namespace d = repa::diffcore;

ProjectionHead::ProjectionHead(const HeadConfig& config, std::uint64_t seed) : config_(config) {
  if (config.input_dim == 0 || config.output_dim == 0) throw ShapeError("projection head: zero dimension");
  Rng rng(seed);
  if (config.linear) {
    Tensor w({config.input_dim, config.output_dim});
    const double sd = 1.0 / std::sqrt(static_cast<double>(config.input_dim));
    for (double& v : w.data()) v = sd * rng.normal();
    phi_t_ = params_.add("phi_t", std::move(w));
  } else {
    first_ = add_dense(params_, "head.0", config.input_dim, config.hidden, rng);
    second_ = add_dense(params_, "head.1", config.hidden, config.output_dim, rng);
  }
}

ProjectionHead ProjectionHead::linear_map(const Tensor& phi) {
  if (phi.rank() != 2) throw ShapeError("linear_map: Phi must be a matrix");
  HeadConfig c;
  c.output_dim = phi.dim(0);
  c.input_dim = phi.dim(1);
  c.linear = true;
  ProjectionHead head(c, 0);
  head.params_.value(head.phi_t_) = d::transpose_matrix(phi);
  return head;
}

Var ProjectionHead::forward(const Binding& binding, Var h) const {
  if (h.shape().size() != 2 || h.shape()[1] != config_.input_dim) {
    throw ShapeError("projection head: expected [R, " + std::to_string(config_.input_dim) + "], got " +
                     d::shape_string(h.shape()));
  }
  if (config_.linear) return d::matmul(h, binding[phi_t_]);
  return apply(binding, second_, d::gelu(apply(binding, first_, h)));
}

Tensor ProjectionHead::project(const Tensor& h) const {
  Graph g;
  Binding b(g, params_, false);
  return forward(b, g.constant(h)).value();
}

Tensor ProjectionHead::phi() const {
  if (!config_.linear) throw ShapeError("projection head: Phi is only defined in linear mode");
  return d::transpose_matrix(params_.value(phi_t_));
}

}  // namespace repa::nets
