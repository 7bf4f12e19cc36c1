#include "repa/schedule/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "repa/diffcore/ops.hpp"
#include "repa/errors.hpp"

namespace repa::schedule {

namespace {

constexpr double kHalfPi = std::numbers::pi / 2.0;

void require_unit_interval(double t, const char* op) {
  if (!(t >= 0.0 && t <= 1.0)) {
    throw ShapeError(std::string(op) + ": t=" + std::to_string(t) + " outside [0,1]");
  }
}

void require_same(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shapes " + diffcore::shape_string(a.shape()) + " vs " +
                     diffcore::shape_string(b.shape()));
  }
}

Tensor combine(double ca, const Tensor& a, double cb, const Tensor& b) {
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = ca * a[i] + cb * b[i];
  return out;
}

}  // namespace

InterpolantSchedule InterpolantSchedule::by_name(std::string_view name) {
  if (name == "linear") return linear();
  if (name == "cosine") return cosine();
  throw ConfigError("unknown schedule '" + std::string(name) + "' (expected linear|cosine)");
}

std::string_view InterpolantSchedule::name() const noexcept {
  return kind_ == ScheduleKind::linear ? "linear" : "cosine";
}

double InterpolantSchedule::alpha(double t) const {
  return kind_ == ScheduleKind::linear ? 1.0 - t : std::cos(kHalfPi * t);
}

double InterpolantSchedule::sigma(double t) const {
  return kind_ == ScheduleKind::linear ? t : std::sin(kHalfPi * t);
}

double InterpolantSchedule::dalpha(double t) const {
  return kind_ == ScheduleKind::linear ? -1.0 : -kHalfPi * std::sin(kHalfPi * t);
}

double InterpolantSchedule::dsigma(double t) const {
  return kind_ == ScheduleKind::linear ? 1.0 : kHalfPi * std::cos(kHalfPi * t);
}

Tensor corrupt(const InterpolantSchedule& s, const Tensor& x0, const Tensor& eps, double t) {
  require_unit_interval(t, "corrupt");
  require_same(x0, eps, "corrupt");
  // exact boundary values, independent of rounding in alpha/sigma
  if (t == 0.0) return x0;
  if (t == 1.0) return eps;
  return combine(s.alpha(t), x0, s.sigma(t), eps);
}

Tensor velocity_target(const InterpolantSchedule& s, const Tensor& x0, const Tensor& eps, double t) {
  require_unit_interval(t, "velocity_target");
  require_same(x0, eps, "velocity_target");
  return combine(s.dalpha(t), x0, s.dsigma(t), eps);
}

double clamp_for_score(double t) { return std::clamp(t, 1e-3, 1.0 - 1e-3); }

Tensor score_from_velocity(const InterpolantSchedule& s, const Tensor& x_t, const Tensor& v, double t) {
  require_same(x_t, v, "score_from_velocity");
  if (!(t > 0.0 && t < 1.0)) {
    throw ShapeError("score_from_velocity: t=" + std::to_string(t) +
                     " must lie strictly inside (0,1)");
  }
  const double a = s.alpha(t), sg = s.sigma(t), da = s.dalpha(t), ds = s.dsigma(t);
  const double den = da * sg - a * ds;
  if (std::abs(den) < 1e-12 || sg == 0.0) {
    throw NumericalError("score_from_velocity: degenerate denominator at t=" + std::to_string(t));
  }
  const double inv = 1.0 / (sg * den);
  return combine(a * inv, v, -da * inv, x_t);
}

DenoiserCoefficients denoiser_coefficients(const InterpolantSchedule& s, double t) {
  require_unit_interval(t, "denoised_estimate");
  const double den = s.dsigma(t) * s.alpha(t) - s.sigma(t) * s.dalpha(t);
  if (std::abs(den) < 1e-12) {
    throw NumericalError("denoised_estimate: degenerate denominator at t=" + std::to_string(t));
  }
  return {s.dsigma(t) / den, -s.sigma(t) / den};
}

Tensor denoised_estimate(const InterpolantSchedule& s, const Tensor& x_t, const Tensor& v, double t) {
  require_same(x_t, v, "denoised_estimate");
  const auto c = denoiser_coefficients(s, t);
  if (t == 0.0) return x_t;
  return combine(c.state, x_t, c.velocity, v);
}

Var denoised_estimate(const InterpolantSchedule& s, Var x_t, Var v, double t) {
  if (x_t.shape() != v.shape()) throw ShapeError("denoised_estimate: state/velocity shapes differ");
  const auto c = denoiser_coefficients(s, t);
  return diffcore::add(diffcore::scale(x_t, c.state), diffcore::scale(v, c.velocity));
}

}  // namespace repa::schedule
