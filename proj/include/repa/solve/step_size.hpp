#pragma once
// Measurement-guidance step sizes.

#include <string_view>

namespace repa::solve {

enum class StepSchedule { inverse_norm, snr };

std::string_view schedule_name(StepSchedule s);
StepSchedule parse_schedule(std::string_view name);  // throws ConfigError

inline constexpr double kResidualFloor = 1e-8;

// inverse_norm: kappa / max(residual, kResidualFloor).
// snr: kappa / max(t / (1 - t), 1), t in (0, 1).
double step_size(StepSchedule schedule, double kappa, double t, double residual);

}  // namespace repa::solve
