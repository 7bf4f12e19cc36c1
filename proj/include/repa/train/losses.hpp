#pragma once
// Training objectives: conditional flow matching and representation
// alignment of projected internal tokens with clean-image encoder features.

#include <span>
#include <vector>

#include "repa/nets/projection_head.hpp"
#include "repa/nets/velocity_model.hpp"
#include "repa/rng.hpp"
#include "repa/schedule/schedule.hpp"

namespace repa::train {

using diffcore::Graph;
using diffcore::Tensor;
using diffcore::Var;

// A corrupted batch: x_t = alpha x0 + sigma eps and the regression target
// dalpha x0 + dsigma eps, for one t per row.
struct FlowBatch {
  Tensor x_t;     // [B, dim]
  Tensor target;  // [B, dim]
  std::vector<double> t;
};

FlowBatch corrupt_batch(const schedule::InterpolantSchedule& schedule, const Tensor& x0, const Tensor& eps,
                        std::span<const double> t);
// Draws t ~ U(0,1) and eps ~ N(0, I) per row.
FlowBatch sample_batch(const schedule::InterpolantSchedule& schedule, const Tensor& x0, Rng& rng);

// Mean over batch rows and coordinates of (v - target)^2.
Var flow_matching_loss(Var velocity, const Tensor& target);
// -(1/(B N)) sum cos(f^[n](x*), g_phi(h_t^[n])). projected and features are [B*N, D1].
Var repa_loss(Var projected, const Tensor& features);

// Scalar convenience: flow loss of `model` on a clean batch x0 [B, dim].
double flow_matching_loss(const nets::VelocityModel& model, const Tensor& x0,
                          const schedule::InterpolantSchedule& schedule, Rng& rng);
// Scalar convenience: REPA loss with features [B*N, D1] of the clean images.
double repa_loss(const nets::VelocityModel& model, const nets::ProjectionHead& head, const Tensor& x0,
                 const Tensor& features, const schedule::InterpolantSchedule& schedule, Rng& rng);

}  // namespace repa::train
