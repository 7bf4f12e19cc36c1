#pragma once
// Pointwise and expected alignment bound
//   REPA(x_bar, x_hat) <= 1 - 1/8 ||mu_f(x) - mu_f(x_hat)||^2
//                         + 1/2 ApproxErr(x, x_bar) + 1/4 MisREPA(x_hat)
// evaluated term by term, together with the slack of each inequality used to
// derive it. Requires unit-norm encoder features.

#include <span>
#include <vector>

#include "repa/theory/alignment.hpp"

namespace repa::theory {

struct AlignmentTriple {
  Tensor x;      // clean image
  Tensor x_bar;  // proxy
  Tensor x_hat;  // estimate
};

// Row sets for one triple, all [N, D1]. projected_hat is g_phi(DiffEnc(x_hat))
// before normalization.
struct AlignmentRows {
  Tensor f_x, f_bar, f_hat, projected_hat;
};

struct Prop1Sample {
  double repa = 0.0;
  double mis_repa = 0.0;
  double approx_err = 0.0;
  double mean_distance = 0.0;  // ||mu_f(x) - mu_f(x_hat)||^2
  double bound = 0.0;          // right-hand side
  double residual = 0.0;       // bound - repa
  // Slack (rhs - lhs) of each derivation step:
  //   0: ||mu_f(x)-mu_f(x_hat)||^2 <= 2||mu_f(x)-mu_g||^2 + 2||mu_f(x_hat)-mu_g||^2
  //   1: ||mu_f(x)-mu_g||^2 <= (1/N) sum ||f_n(x)-g_n||^2
  //   2: ||mu_f(x_hat)-mu_g||^2 <= MisREPA(x_hat)
  //   3: (1/N) sum ||f_n(x)-g_n||^2 <= 2 (1/N) sum ||f_n(x_bar)-g_n||^2 + 2 ApproxErr
  double step_slack[4] = {0.0, 0.0, 0.0, 0.0};
  double identity_error = 0.0;  // max_n |cos - (1 - 1/2 ||f_n(x_bar) - g_n||^2)|
};

struct AlignmentReport {
  std::vector<Prop1Sample> samples;
  double min_residual = 0.0;
  std::size_t violations = 0;  // samples with residual < -tolerance
  double min_step_slack = 0.0;
  double max_identity_error = 0.0;
  // Expectation form over the batch, with the MMD between the x and x_hat sets.
  double mmd = 0.0;
  double mean_repa = 0.0;
  double mean_approx_err = 0.0;
  double mean_mis_repa = 0.0;
  double expected_bound = 0.0;
  double expected_residual = 0.0;

  static constexpr double kTolerance = 1e-9;
  bool holds() const { return violations == 0 && expected_residual >= -kTolerance; }
};

// Terms of one triple from precomputed rows.
Prop1Sample prop1_sample(const AlignmentRows& rows);
// Aggregates samples; mmd comes from the mean embeddings of f_x and f_hat.
AlignmentReport prop1_report(std::span<const AlignmentRows> rows);

// Encodes every triple at t = 0 and checks the bound. Throws ConfigError if
// the encoder does not normalize its features.
AlignmentReport check_prop1(std::span<const AlignmentTriple> triples, const DiffEncoder& diffenc,
                            const nets::ProjectionHead& head, const nets::FeatureEncoder& encoder);

// max_n |cos(a_n, b_n) - (1 - 1/2 ||a_n - b_n||^2)| for unit rows.
double cosine_identity_error(const Tensor& a, const Tensor& b);
// (1/N) sum ||a_n - b_n||^2 - ||mean a - mean b||^2, non-negative by Jensen.
double jensen_slack(const Tensor& a, const Tensor& b);

}  // namespace repa::theory
