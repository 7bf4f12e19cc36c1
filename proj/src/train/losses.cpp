#include "repa/train/losses.hpp"

#include <string>

#include "repa/diffcore/ops.hpp"
#include "repa/errors.hpp"

namespace repa::train {

namespace d = repa::diffcore;

FlowBatch corrupt_batch(const schedule::InterpolantSchedule& schedule, const Tensor& x0, const Tensor& eps,
                        std::span<const double> t) {
  if (x0.rank() != 2 || x0.dim(0) == 0) throw ShapeError("flow batch: expected non-empty [B, dim]");
  if (eps.shape() != x0.shape() || t.size() != x0.dim(0)) throw ShapeError("flow batch: shape mismatch");
  FlowBatch b{Tensor(x0.shape()), Tensor(x0.shape()), std::vector<double>(t.begin(), t.end())};
  const std::size_t dim = x0.dim(1);
  for (std::size_t r = 0; r < x0.dim(0); ++r) {
    const double a = schedule.alpha(t[r]), s = schedule.sigma(t[r]);
    const double da = schedule.dalpha(t[r]), ds = schedule.dsigma(t[r]);
    for (std::size_t j = 0; j < dim; ++j) {
      b.x_t.at(r, j) = a * x0.at(r, j) + s * eps.at(r, j);
      b.target.at(r, j) = da * x0.at(r, j) + ds * eps.at(r, j);
    }
  }
  return b;
}

FlowBatch sample_batch(const schedule::InterpolantSchedule& schedule, const Tensor& x0, Rng& rng) {
  if (x0.rank() != 2 || x0.dim(0) == 0) throw ShapeError("flow batch: empty batch");
  std::vector<double> t(x0.dim(0));
  for (double& v : t) v = rng.uniform();
  const Tensor eps = rng.normal(x0.shape());
  return corrupt_batch(schedule, x0, eps, t);
}

Var flow_matching_loss(Var velocity, const Tensor& target) {
  if (velocity.shape() != target.shape()) throw ShapeError("flow_matching_loss: shape mismatch");
  Graph& g = velocity.graph();
  return d::mean(d::square(d::sub(velocity, g.constant(target, "flow_target"))));
}

Var repa_loss(Var projected, const Tensor& features) {
  if (projected.shape() != features.shape()) {
    throw ShapeError("repa_loss: head output " + d::shape_string(projected.shape()) + " vs features " +
                     d::shape_string(features.shape()));
  }
  Graph& g = projected.graph();
  return d::neg(d::mean(d::cosine_rows(g.constant(features, "clean_features"), projected)));
}

double flow_matching_loss(const nets::VelocityModel& model, const Tensor& x0,
                          const schedule::InterpolantSchedule& schedule, Rng& rng) {
  const FlowBatch b = sample_batch(schedule, x0, rng);
  Graph g;
  nets::Binding p(g, model.params(), false);
  auto out = model.forward(p, g.constant(b.x_t), b.t);
  return flow_matching_loss(out.velocity, b.target).value().item();
}

double repa_loss(const nets::VelocityModel& model, const nets::ProjectionHead& head, const Tensor& x0,
                 const Tensor& features, const schedule::InterpolantSchedule& schedule, Rng& rng) {
  const FlowBatch b = sample_batch(schedule, x0, rng);
  Graph g;
  nets::Binding p(g, model.params(), false);
  nets::Binding h(g, head.params(), false);
  auto out = model.forward(p, g.constant(b.x_t), b.t);
  return repa_loss(head.forward(h, out.tap), features).value().item();
}

}  // namespace repa::train
