#pragma once
// Reverse-time steppers on the grid t_k = k/T, k = T..1. A step moves from t
// to t - dt, integrating toward data.

#include <vector>

#include "repa/rng.hpp"
#include "repa/schedule/prior.hpp"

namespace repa::schedule {

// x - dt v(x, t).
Tensor ode_step(const FlowPrior& model, const Tensor& x_t, double t, double dt);

// Euler-Maruyama step of the reverse SDE with diffusion coefficient g:
//   x - dt (v - g^2 s) + sqrt(2 dt) g xi.
// The score is taken at clamp_for_score(t). With g == 0 this is ode_step.
Tensor sde_step(const FlowPrior& model, const Tensor& x_t, double t, double dt, double g, Rng& rng);

// Descending grid {1, (T-1)/T, ..., 1/T, 0}.
std::vector<double> time_grid(std::size_t steps);

enum class Sampler { ode, sde };

// Integrates x_1 down to t = 0 in `steps` uniform steps. The SDE uses
// g(t) = schedule.diffusion(t) scaled by g_scale.
Tensor sample(const FlowPrior& model, Tensor x1, std::size_t steps, Sampler sampler, Rng* rng = nullptr,
              double g_scale = 1.0);

}  // namespace repa::schedule
