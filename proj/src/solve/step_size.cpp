#include "repa/solve/step_size.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "repa/errors.hpp"

namespace repa::solve {

std::string_view schedule_name(StepSchedule s) {
  return s == StepSchedule::snr ? "snr" : "inverse-norm";
}

StepSchedule parse_schedule(std::string_view name) {
  if (name == "snr") return StepSchedule::snr;
  if (name == "inverse-norm" || name == "inverse_norm") return StepSchedule::inverse_norm;
  throw ConfigError("unknown step schedule '" + std::string(name) + "' (expected snr or inverse-norm)");
}

double step_size(StepSchedule schedule, double kappa, double t, double residual) {
  if (!(kappa > 0.0)) throw ConfigError("step_size: kappa must be positive");
  if (schedule == StepSchedule::snr) {
    if (!(t > 0.0 && t < 1.0)) throw ShapeError("step_size: snr schedule needs t in (0,1), got " + std::to_string(t));
    return kappa / std::max(t / (1.0 - t), 1.0);
  }
  if (!(residual >= 0.0)) throw ShapeError("step_size: residual must be >= 0");
  return kappa / std::max(residual, kResidualFloor);
}

}  // namespace repa::solve
