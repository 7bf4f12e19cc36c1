#pragma once
// Contraction of the internal representation under one alignment step
//   z' = z - lambda grad_z ||f(x_bar) - Phi G2(z)||^2
// with a linear head Phi. Writing h = G2(z, t), h* = G2(z*, 0) and
// A_t = J J^T for the tap Jacobian J,
//   ||h' - h*|| <= C1 ||h - h*|| + C2 (sqrt(ApproxErr) + sqrt(MisREPA)),
//   C1 = ||I - 2 lambda A_t Phi~^T Phi~||_2,  C2 = 2 lambda sqrt(N) ||A_t Phi~^T||_2,
// with Phi~ = I_N (x) Phi. For a linear tap the step is exact and the bound is
// a triangle inequality; C1 < 1 needs lambda < 1 / (sigma_max(J)^2 sigma_max(Phi)^2).

#include <cstdint>
#include <span>
#include <vector>

#include "repa/nets/projection_head.hpp"
#include "repa/schedule/prior.hpp"

namespace repa::theory {

using diffcore::Tensor;

// Flow prior whose tap is the linear map h = reshape(J z, [N, D2]). The
// velocity is -z; only the tap matters here.
class LinearTapPrior final : public schedule::FlowPrior {
 public:
  LinearTapPrior(Tensor jacobian, std::size_t tokens);

  const schedule::InterpolantSchedule& schedule() const override { return schedule_; }
  diffcore::Shape state_shape() const override { return {jacobian_.dim(1)}; }
  schedule::PriorOutput evaluate(diffcore::Graph& graph, diffcore::Var state, double t) const override;
  const Tensor& jacobian() const noexcept { return jacobian_; }

 private:
  Tensor jacobian_;  // [N*D2, d]
  std::size_t tokens_;
  schedule::InterpolantSchedule schedule_ = schedule::InterpolantSchedule::linear();
};

struct LinearFixtureConfig {
  std::size_t tokens = 4;
  std::size_t token_dim = 6;    // D2
  std::size_t feature_dim = 8;  // D1 >= D2 keeps Phi injective
  std::size_t state_dim = 32;   // d >= N*D2 keeps A_t invertible
  double jacobian_min = 0.6;    // singular values of J in [min, 1]
  double phi_min = 0.8;         // singular values of Phi in [min, 1]
  double misalignment = 0.1;    // f(x) = Phi~ h* + misalignment * noise
  double proxy_noise = 0.2;     // f(x_bar) = f(x) + proxy_noise * noise
  double offset = 1.0;          // z_t = z* + offset * noise
};

struct LinearFixture {
  Tensor jacobian;  // [N*D2, d]
  Tensor phi;       // [D1, D2]
  Tensor z_star, z_t;
  Tensor h_star;    // [N, D2]
  Tensor f_x, f_bar;  // [N, D1]
  std::size_t tokens = 0;
};

LinearFixture make_linear_fixture(const LinearFixtureConfig& config, std::uint64_t seed);

// 1 / (sigma_max(J)^2 sigma_max(Phi)^2) by power iteration.
double lambda_threshold(const Tensor& jacobian, const Tensor& phi);

// Tap Jacobian d vec(G2(z, t)) / dz: [N*D2, d], one reverse pass per row.
Tensor tap_jacobian(const schedule::FlowPrior& prior, const Tensor& z, double t);
Tensor tap_at(const schedule::FlowPrior& prior, const Tensor& z, double t);

// z - lambda grad_z sum_n ||target_n - g_phi(G2^[n](z, t))||^2.
Tensor alignment_descent_step(const schedule::FlowPrior& prior, const nets::ProjectionHead& head,
                              const Tensor& target, const Tensor& z, double t, double lambda);

// C1 and C2 from the Jacobian and Phi, by power iteration on the factored operators.
struct ContractionConstants {
  double c1 = 0.0;
  double c2 = 0.0;
};
ContractionConstants contraction_constants(const Tensor& jacobian, const Tensor& phi, std::size_t tokens,
                                           double lambda);

struct ContractionCheck {
  double lambda = 0.0;
  double gap_before = 0.0;  // ||h_t - h*||
  double gap_after = 0.0;   // ||h' - h*||
  double ratio = 0.0;       // gap_after / gap_before
  double c1 = 0.0;
  double c2 = 0.0;
  double approx_err = 0.0;  // (1/N) ||f(x_bar) - f(x)||^2
  double mis_repa = 0.0;    // (1/N) ||f(x) - Phi~ h*||^2
  double bound = 0.0;
  bool holds = false;
};

struct Prop2Report {
  double threshold = 0.0;
  double sigma_jacobian = 0.0;
  double sigma_phi = 0.0;
  std::vector<ContractionCheck> checks;
};

// One alignment step per lambda from z_t. head must be linear (ConfigError).
Prop2Report check_prop2(const schedule::FlowPrior& prior, const nets::ProjectionHead& head, const Tensor& z_t,
                        double t, const Tensor& h_star, const Tensor& f_x, const Tensor& f_bar,
                        std::span<const double> lambdas);
Prop2Report check_prop2(const LinearFixture& fixture, std::span<const double> lambdas);

// Least-squares linear head from taps [R, D2] to features [R, D1] with ridge
// penalty, for probing a model trained with a perceptron head.
nets::ProjectionHead fit_linear_head(const Tensor& taps, const Tensor& features, double ridge = 1e-6);

}  // namespace repa::theory
