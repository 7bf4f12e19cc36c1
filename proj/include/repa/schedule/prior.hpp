#pragma once
// A flow prior is anything that evaluates a velocity field on the tape,
// optionally exposing an internal feature tap. Learned velocity models and the
// closed-form Gaussian field both implement it, so samplers and solvers can be
// tested against exact fields.

#include <optional>

#include "repa/diffcore/graph.hpp"
#include "repa/diffcore/tensor.hpp"
#include "repa/schedule/schedule.hpp"

namespace repa::schedule {

using diffcore::Graph;
using diffcore::Shape;

struct PriorOutput {
  Var velocity;            // same shape as the state
  std::optional<Var> tap;  // N x D2 patch features, when the prior has them
};

class FlowPrior {
 public:
  virtual ~FlowPrior() = default;

  virtual const InterpolantSchedule& schedule() const = 0;
  // Shape of a single state (e.g. {H, W} for images, {d} for latents).
  virtual Shape state_shape() const = 0;
  virtual PriorOutput evaluate(Graph& graph, Var state, double t) const = 0;

  // Velocity without keeping a tape around.
  Tensor velocity(const Tensor& state, double t) const;
};

// Exact velocity field for data distributed as N(mean, s^2 I).
class GaussianPrior final : public FlowPrior {
 public:
  GaussianPrior(InterpolantSchedule schedule, Tensor mean, double data_std);

  const InterpolantSchedule& schedule() const override { return schedule_; }
  Shape state_shape() const override { return mean_.shape(); }
  PriorOutput evaluate(Graph& graph, Var state, double t) const override;

  const Tensor& mean() const noexcept { return mean_; }
  double data_std() const noexcept { return std_; }

  // Closed-form oracles.
  double marginal_variance(double t) const;                   // alpha^2 s^2 + sigma^2
  Tensor posterior_mean(const Tensor& x_t, double t) const;   // E[x0 | x_t]
  Tensor score(const Tensor& x_t, double t) const;            // grad log p_t
  // Probability-flow transport of x_from at t_from to time t_to.
  Tensor transport(const Tensor& x_from, double t_from, double t_to) const;

 private:
  // v = gain(t) x + offset(t) mean
  double gain(double t) const;

  InterpolantSchedule schedule_;
  Tensor mean_;
  double std_;
};

}  // namespace repa::schedule
