#pragma once
// Alignment quantities between encoder patch features f^[n](x) and projected
// internal tokens g_phi(DiffEnc^[n](x, t)). Projected tokens are compared
// after unit normalization, matching the cosine used in training.

#include <cstdint>
#include <span>

#include "repa/nets/autoencoder.hpp"
#include "repa/nets/feature_encoder.hpp"
#include "repa/nets/projection_head.hpp"
#include "repa/nets/velocity_model.hpp"
#include "repa/schedule/schedule.hpp"

namespace repa::theory {

using diffcore::Tensor;

// Internal representation of an image: encode to the model's state space
// (through the autoencoder for latent models), corrupt to time t, read the tap.
class DiffEncoder {
 public:
  DiffEncoder(const nets::VelocityModel& model, schedule::InterpolantSchedule schedule,
              const nets::Autoencoder* ae = nullptr);

  const nets::VelocityModel& model() const noexcept { return *model_; }
  const schedule::InterpolantSchedule& schedule() const noexcept { return schedule_; }
  const nets::Autoencoder* autoencoder() const noexcept { return ae_; }
  std::size_t tokens() const { return model_->config().tokens(); }

  // Clean state E(x).
  Tensor state(const Tensor& image) const;
  // Tap [N, D2] at x_t = alpha(t) E(x) + sigma(t) eps with eps from `seed`;
  // t = 0 uses the clean state and draws nothing.
  Tensor tap(const Tensor& image, double t, std::uint64_t seed = 0) const;

 private:
  const nets::VelocityModel* model_;
  schedule::InterpolantSchedule schedule_;
  const nets::Autoencoder* ae_;
};

// Row-wise unit normalization; rows with norm below 1e-12 become
// (1,...,1)/sqrt(D), the same convention as the differentiable op.
Tensor normalized_rows(const Tensor& rows);
// (1/N) sum_n cos(a_n, b_n).
double mean_cosine(const Tensor& a, const Tensor& b);
// (1/N) sum_n ||a_n - b_n||^2.
double mean_squared_distance(const Tensor& a, const Tensor& b);

// Throws ShapeError unless encoder, model and head agree on N, D1 and D2.
void check_grid(const DiffEncoder& diffenc, const nets::ProjectionHead& head, const nets::FeatureEncoder& encoder);

// g_phi(DiffEnc(x, t)) with rows normalized: [N, D1].
Tensor projected_tokens(const Tensor& image, double t, const DiffEncoder& diffenc, const nets::ProjectionHead& head,
                        std::uint64_t seed = 0);

// MisREPA from rows: (1/N) sum_n ||f_n - normalize(p_n)||^2.
double mis_repa(const Tensor& features, const Tensor& projected);
double mis_repa(const Tensor& image, double t, const DiffEncoder& diffenc, const nets::ProjectionHead& head,
                const nets::FeatureEncoder& encoder, std::uint64_t seed = 0);
// Mean of mis_repa over the given times (diagnostic t-sweep).
double mis_repa_sweep(const Tensor& image, std::span<const double> times, const DiffEncoder& diffenc,
                      const nets::ProjectionHead& head, const nets::FeatureEncoder& encoder, std::uint64_t seed = 0);
inline constexpr double kDefaultSweep[] = {0.0, 0.25, 0.5, 0.75};

// (1/N) sum_n ||f_n(x) - f_n(x_bar)||^2.
double approx_err(const Tensor& x, const Tensor& x_bar, const nets::FeatureEncoder& encoder);

// (1/N) sum_n cos(f_n(x_bar), g_phi(DiffEnc_n(x_hat, 0))).
double repa_score(const Tensor& x_bar, const Tensor& x_hat, const DiffEncoder& diffenc,
                  const nets::ProjectionHead& head, const nets::FeatureEncoder& encoder);

}  // namespace repa::theory
