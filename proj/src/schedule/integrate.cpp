#include "repa/schedule/integrate.hpp"

#include <cmath>
#include <string>

#include "repa/errors.hpp"

namespace repa::schedule {

namespace {

void check_step(double t, double dt, const char* op) {
  if (!(dt > 0.0)) throw ShapeError(std::string(op) + ": dt must be > 0");
  if (!(t >= 0.0 && t <= 1.0)) throw ShapeError(std::string(op) + ": t outside [0,1]");
}

Tensor checked_velocity(const FlowPrior& model, const Tensor& x, double t, const char* op) {
  Tensor v = model.velocity(x, t);
  if (!v.all_finite()) throw NumericalError(std::string(op) + ": non-finite velocity at t=" + std::to_string(t));
  if (v.shape() != x.shape()) throw ShapeError(std::string(op) + ": velocity shape differs from state");
  return v;
}

}  // namespace

Tensor ode_step(const FlowPrior& model, const Tensor& x_t, double t, double dt) {
  check_step(t, dt, "ode_step");
  const Tensor v = checked_velocity(model, x_t, t, "ode_step");
  Tensor out(x_t.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x_t[i] - dt * v[i];
  return out;
}

Tensor sde_step(const FlowPrior& model, const Tensor& x_t, double t, double dt, double g, Rng& rng) {
  if (g == 0.0) return ode_step(model, x_t, t, dt);
  check_step(t, dt, "sde_step");
  if (!(g > 0.0) || !std::isfinite(g)) throw ShapeError("sde_step: g must be finite and >= 0");
  const double tc = clamp_for_score(t);
  const Tensor v = checked_velocity(model, x_t, t, "sde_step");
  const Tensor vc = tc == t ? v : checked_velocity(model, x_t, tc, "sde_step");
  const Tensor s = score_from_velocity(model.schedule(), x_t, vc, tc);
  const double g2 = g * g, noise = g * std::sqrt(2.0 * dt);
  Tensor out(x_t.shape());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = x_t[i] - dt * (v[i] - g2 * s[i]) + noise * rng.normal();
  }
  return out;
}

std::vector<double> time_grid(std::size_t steps) {
  if (steps == 0) throw ShapeError("time_grid: steps must be >= 1");
  std::vector<double> grid(steps + 1);
  for (std::size_t k = 0; k <= steps; ++k) {
    grid[k] = static_cast<double>(steps - k) / static_cast<double>(steps);
  }
  return grid;
}

Tensor sample(const FlowPrior& model, Tensor x1, std::size_t steps, Sampler sampler, Rng* rng, double g_scale) {
  if (sampler == Sampler::sde && rng == nullptr) throw ShapeError("sample: the SDE sampler needs an rng");
  const auto grid = time_grid(steps);
  Tensor x = std::move(x1);
  for (std::size_t k = 0; k < steps; ++k) {
    const double t = grid[k], dt = grid[k] - grid[k + 1];
    if (sampler == Sampler::ode) {
      x = ode_step(model, x, t, dt);
    } else {
      x = sde_step(model, x, t, dt, g_scale * model.schedule().diffusion(t), *rng);
    }
  }
  return x;
}

}  // namespace repa::schedule
