#pragma once
// Stochastic-interpolant schedules x_t = alpha(t) x0 + sigma(t) eps with
// t = 0 data and t = 1 noise, and the conversions between velocity, score and
// denoised estimates that the samplers and solvers rely on.

#include <string>
#include <string_view>

#include "repa/diffcore/graph.hpp"
#include "repa/diffcore/tensor.hpp"

namespace repa::schedule {

using diffcore::Tensor;
using diffcore::Var;

enum class ScheduleKind { linear, cosine };

class InterpolantSchedule {
 public:
  static InterpolantSchedule linear() { return InterpolantSchedule(ScheduleKind::linear); }
  static InterpolantSchedule cosine() { return InterpolantSchedule(ScheduleKind::cosine); }
  // "linear" | "cosine"; throws ConfigError otherwise.
  static InterpolantSchedule by_name(std::string_view name);

  ScheduleKind kind() const noexcept { return kind_; }
  std::string_view name() const noexcept;

  double alpha(double t) const;
  double sigma(double t) const;
  double dalpha(double t) const;
  double dsigma(double t) const;
  // Diffusion coefficient of the stochastic sampler; sigma(t) by default.
  double diffusion(double t) const { return sigma(t); }

 private:
  explicit InterpolantSchedule(ScheduleKind kind) : kind_(kind) {}
  ScheduleKind kind_;
};

// alpha(t) x0 + sigma(t) eps. Throws ShapeError for t outside [0,1].
Tensor corrupt(const InterpolantSchedule& s, const Tensor& x0, const Tensor& eps, double t);
// dalpha(t) x0 + dsigma(t) eps.
Tensor velocity_target(const InterpolantSchedule& s, const Tensor& x0, const Tensor& eps, double t);

// Score of the time-t marginal recovered from the velocity. Requires t strictly
// inside (0,1); callers near the boundary clamp with clamp_for_score first.
Tensor score_from_velocity(const InterpolantSchedule& s, const Tensor& x_t, const Tensor& v, double t);
double clamp_for_score(double t);

// E[x0 | x_t] from the velocity parameterization,
// (dsigma x_t - sigma v) / (dsigma alpha - sigma dalpha).
Tensor denoised_estimate(const InterpolantSchedule& s, const Tensor& x_t, const Tensor& v, double t);
// Differentiable form of the same map.
Var denoised_estimate(const InterpolantSchedule& s, Var x_t, Var v, double t);

// Coefficients (c_x, c_v) with denoised = c_x x_t + c_v v.
struct DenoiserCoefficients {
  double state;
  double velocity;
};
DenoiserCoefficients denoiser_coefficients(const InterpolantSchedule& s, double t);

}  // namespace repa::schedule
