#pragma once
// Guided flow solvers for linear inverse problems y = A D(z) + n.
//
// Every iteration evaluates the prior once at the pre-update state z_t and
// takes all gradients there: an Euler step of the probability-flow ODE,
// optional hard data consistency with renoising (ReSample), then the
// measurement step -eta grad ||y - A D(z0_hat)||^2 and the regularizer step
// +lambda grad sum_n cos(c_proxy^[n], g_phi(tap^[n])).

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "repa/degrade/degrade.hpp"
#include "repa/nets/feature_encoder.hpp"
#include "repa/nets/projection_head.hpp"
#include "repa/schedule/prior.hpp"
#include "repa/solve/decoder.hpp"
#include "repa/solve/proxy.hpp"
#include "repa/solve/step_size.hpp"

namespace repa::solve {

enum class SolverKind { pixel_dps, latent_dps, resample };
// repa: align the tap through the head. feature_space: align encoder
// features of the decoded estimate, bypassing the tap.
enum class Regularizer { repa, feature_space };

std::string_view solver_name(SolverKind kind);
SolverKind parse_solver(std::string_view name);
std::string_view regularizer_name(Regularizer r);
Regularizer parse_regularizer(std::string_view name);

struct SolverConfig {
  SolverKind kind = SolverKind::latent_dps;
  std::size_t steps = 50;
  StepSchedule schedule = StepSchedule::snr;
  double kappa = 2.0;
  double lambda = 0.0;
  Regularizer regularizer = Regularizer::repa;
  ProxyRule proxy = ProxyRule::measurement;
  // Iteration indices k (t = k / steps) that run a consistency solve;
  // ReSample only. Empty means none.
  std::vector<std::size_t> resample_steps;
  double gamma = 0.4;
  std::size_t inner_iterations = 30;
  double inner_step = 0.1;
  // Take the regularizer gradient at the post-measurement state instead of z_t.
  bool reevaluate_regularizer = false;
  std::uint64_t seed = 0;

  void validate() const;  // throws ConfigError
};

// Every floor(T/10)-th iteration index in the second half of the trajectory.
std::vector<std::size_t> default_resample_steps(std::size_t steps);

struct TraceStep {
  double t = 0.0;
  std::string state_hash;  // post-update state
  double residual = 0.0;   // ||y - A D(z0_hat)|| at z_t
  double repa_score = 0.0;  // mean patch cosine at z_t; NaN without head or tap
  double eta = 0.0;
};

struct ConsistencySolve {
  double t = 0.0;
  double residual_before = 0.0;  // at z0_hat
  double residual_after = 0.0;   // at the kept iterate
};

struct SolverTrace {
  std::vector<TraceStep> steps;
  std::vector<ConsistencySolve> consistency;
  Tensor final_state;
  Tensor reconstruction;  // D(z_0) clamped to [0,1]
  double approx_err = 0.0;  // (1/N) sum ||f(x) - c_proxy||^2 when a reference was given

  void write_csv(const std::filesystem::path& path) const;
};

// Everything a solver consumes. head and encoder may be null when lambda = 0.
struct Problem {
  const schedule::FlowPrior* prior = nullptr;
  const Decoder* decoder = nullptr;
  const degrade::DegradationOp* op = nullptr;
  Tensor y;
  const nets::ProjectionHead* head = nullptr;
  const nets::FeatureEncoder* encoder = nullptr;
  // Clean image, only for reporting ApproxErr of the initial proxy.
  const Tensor* reference = nullptr;
};

SolverTrace run_solver(const SolverConfig& config, const Problem& problem);

// Convenience wrappers over run_solver with the kind fixed.
SolverTrace pixel_dps(SolverConfig config, const Problem& problem);
SolverTrace latent_dps(SolverConfig config, const Problem& problem);
SolverTrace resample_repa(SolverConfig config, const Problem& problem);

// Quantities at one state, all from a single prior evaluation.
struct GuidanceEval {
  Tensor velocity;
  Tensor denoised;    // z0_hat
  Tensor decoded;     // D(z0_hat)
  double residual = 0.0;
  Tensor data_grad;   // grad_z ||y - A D(z0_hat)||^2
  double score = 0.0;  // sum_n cos, when requested
  Tensor score_grad;
};

// Objective of the regularizer gradient at a state.
struct AlignmentTarget {
  Regularizer kind = Regularizer::repa;
  const Tensor* proxy = nullptr;  // [N, D1] constant
  const nets::ProjectionHead* head = nullptr;
  const nets::FeatureEncoder* encoder = nullptr;
};

GuidanceEval evaluate_guidance(const Problem& problem, const Tensor& z, double t, bool data_grad,
                               const AlignmentTarget* align);

// One Euler step then z -= eta grad ||y - A D(z0_hat)||^2.
Tensor latent_dps_step(const Problem& problem, const Tensor& z, double t, double dt, double eta);
// z + lambda grad_z sum_n cos(proxy^[n], g_phi(G2^[n](z, t))).
Tensor repa_step(const schedule::FlowPrior& prior, const nets::ProjectionHead& head, const Tensor& proxy,
                 const Tensor& z, double t, double lambda);
// z + lambda grad_z sum_n cos(f^[n](y), f^[n](D(z0_hat(z, t)))); y_features [N, D1].
Tensor feature_space_variant_step(const schedule::FlowPrior& prior, const Decoder& decoder,
                                  const nets::FeatureEncoder& encoder, const Tensor& y_features, const Tensor& z,
                                  double t, double lambda);

// argmin_z 1/2 ||y - A D(z)||^2 by gradient descent from z0, keeping the best
// iterate. Returns the kept iterate and its residual norm.
std::pair<Tensor, double> consistency_solve(const Decoder& decoder, const degrade::DegradationOp& op,
                                            const Tensor& y, const Tensor& z0, std::size_t iterations,
                                            double step);
// alpha(t') z0 + sigma(t') (gamma eps + (1 - gamma) eps_hat), with eps_hat the
// noise implied by z_prev relative to anchor at t'.
Tensor stochastic_resample(const schedule::InterpolantSchedule& s, const Tensor& z0, const Tensor& z_prev,
                           const Tensor& anchor, double t_prev, double gamma, Rng& rng);

std::string state_hash(const Tensor& state);

}  // namespace repa::solve
