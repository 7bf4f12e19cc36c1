#include "repa/theory/alignment.hpp"

#include <cmath>
#include <string>

#include "repa/errors.hpp"
#include "repa/rng.hpp"

namespace repa::theory {

namespace {

void require_rows(const char* op, const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": row sets must share a rank-2 shape, got " +
                     diffcore::shape_string(a.shape()) + " and " + diffcore::shape_string(b.shape()));
  }
  if (a.dim(0) == 0) throw ShapeError(std::string(op) + ": no rows");
}

}  // namespace

DiffEncoder::DiffEncoder(const nets::VelocityModel& model, schedule::InterpolantSchedule schedule,
                         const nets::Autoencoder* ae)
    : model_(&model), schedule_(schedule), ae_(ae) {
  const std::size_t state = model.config().state_size();
  if (ae && ae->config().latent != state) {
    throw ShapeError("DiffEncoder: latent size " + std::to_string(ae->config().latent) +
                     " does not match model state size " + std::to_string(state));
  }
}

Tensor DiffEncoder::state(const Tensor& image) const {
  if (ae_) {
    if (image.size() != ae_->config().image_size()) throw ShapeError("DiffEncoder: image size mismatch");
    return ae_->encode(image);
  }
  if (image.size() != model_->config().state_size()) throw ShapeError("DiffEncoder: image size mismatch");
  return image.reshaped({model_->config().height, model_->config().width});
}

Tensor DiffEncoder::tap(const Tensor& image, double t, std::uint64_t seed) const {
  Tensor x = state(image);
  if (t != 0.0) {
    Rng rng(seed);
    x = schedule::corrupt(schedule_, x, rng.normal(x.shape()), t);
  }
  return model_->velocity_and_tap(x, t).second;
}

Tensor normalized_rows(const Tensor& rows) {
  if (rows.rank() != 2) throw ShapeError("normalized_rows: expected a rank-2 tensor");
  const std::size_t n = rows.dim(0), d = rows.dim(1);
  Tensor out(rows.shape());
  for (std::size_t r = 0; r < n; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < d; ++c) s += rows.at(r, c) * rows.at(r, c);
    const double norm = std::sqrt(s);
    for (std::size_t c = 0; c < d; ++c) {
      out.at(r, c) = norm < 1e-12 ? 1.0 / std::sqrt(static_cast<double>(d)) : rows.at(r, c) / norm;
    }
  }
  return out;
}

double mean_cosine(const Tensor& a, const Tensor& b) {
  require_rows("mean_cosine", a, b);
  const Tensor ua = normalized_rows(a), ub = normalized_rows(b);
  const std::size_t n = a.dim(0), d = a.dim(1);
  double total = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    double c = 0.0;
    for (std::size_t k = 0; k < d; ++k) c += ua.at(r, k) * ub.at(r, k);
    total += c;
  }
  return total / static_cast<double>(n);
}

double mean_squared_distance(const Tensor& a, const Tensor& b) {
  require_rows("mean_squared_distance", a, b);
  double total = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double e = a[i] - b[i];
    total += e * e;
  }
  return total / static_cast<double>(a.dim(0));
}

void check_grid(const DiffEncoder& diffenc, const nets::ProjectionHead& head, const nets::FeatureEncoder& encoder) {
  const auto& mc = diffenc.model().config();
  if (diffenc.tokens() != encoder.tokens()) {
    throw ShapeError("patch grid mismatch: model has " + std::to_string(diffenc.tokens()) + " tokens, encoder " +
                     std::to_string(encoder.tokens()));
  }
  if (head.config().input_dim != mc.token_dim || head.config().output_dim != encoder.feature_dim()) {
    throw ShapeError("projection head maps " + std::to_string(head.config().input_dim) + " -> " +
                     std::to_string(head.config().output_dim) + ", expected " + std::to_string(mc.token_dim) +
                     " -> " + std::to_string(encoder.feature_dim()));
  }
}

Tensor projected_tokens(const Tensor& image, double t, const DiffEncoder& diffenc, const nets::ProjectionHead& head,
                        std::uint64_t seed) {
  return normalized_rows(head.project(diffenc.tap(image, t, seed)));
}

double mis_repa(const Tensor& features, const Tensor& projected) {
  require_rows("mis_repa", features, projected);
  return mean_squared_distance(features, normalized_rows(projected));
}

double mis_repa(const Tensor& image, double t, const DiffEncoder& diffenc, const nets::ProjectionHead& head,
                const nets::FeatureEncoder& encoder, std::uint64_t seed) {
  check_grid(diffenc, head, encoder);
  return mis_repa(encoder.encode(image).rows, head.project(diffenc.tap(image, t, seed)));
}

double mis_repa_sweep(const Tensor& image, std::span<const double> times, const DiffEncoder& diffenc,
                      const nets::ProjectionHead& head, const nets::FeatureEncoder& encoder, std::uint64_t seed) {
  if (times.empty()) throw ShapeError("mis_repa_sweep: no times");
  double total = 0.0;
  for (std::size_t i = 0; i < times.size(); ++i) {
    total += mis_repa(image, times[i], diffenc, head, encoder, Rng::derive(seed, i));
  }
  return total / static_cast<double>(times.size());
}

double approx_err(const Tensor& x, const Tensor& x_bar, const nets::FeatureEncoder& encoder) {
  if (x.shape() != x_bar.shape()) {
    throw ShapeError("approx_err: " + diffcore::shape_string(x.shape()) + " vs " +
                     diffcore::shape_string(x_bar.shape()));
  }
  return mean_squared_distance(encoder.encode(x).rows, encoder.encode(x_bar).rows);
}

double repa_score(const Tensor& x_bar, const Tensor& x_hat, const DiffEncoder& diffenc,
                  const nets::ProjectionHead& head, const nets::FeatureEncoder& encoder) {
  check_grid(diffenc, head, encoder);
  return mean_cosine(encoder.encode(x_bar).rows, head.project(diffenc.tap(x_hat, 0.0)));
}

}  // namespace repa::theory
