#include "repa/nets/feature_encoder.hpp"

#include <cmath>
#include <string>

#include "repa/diffcore/ops.hpp"
#include "repa/errors.hpp"
#include "repa/rng.hpp"

namespace repa::nets {

namespace d = repa::diffcore;

void EncoderConfig::validate() const {
  if (patch == 0 || height % patch || width % patch) throw ShapeError("encoder: patch must divide the image");
  if (pool == 0 || patch % pool) throw ShapeError("encoder: pool width must divide the patch");
  if (feature_dim == 0) throw ShapeError("encoder: zero feature dimension");
}

std::size_t PatchFeatures::degenerate_count() const {
  std::size_t n = 0;
  for (bool b : degenerate) n += b;
  return n;
}

FeatureEncoder::FeatureEncoder(const EncoderConfig& config) : config_(config) {
  config_.validate();
  const std::size_t side = config_.patch / config_.pool, k = side * side;
  Rng rng(config_.seed);
  projection_ = Tensor({config_.tokens(), k, config_.feature_dim});
  const double sd = 1.0 / std::sqrt(static_cast<double>(k));
  for (double& v : projection_.data()) v = sd * rng.normal();
}

Var FeatureEncoder::project_patches(Graph& graph, Var image) const {
  const std::size_t h = config_.height, w = config_.width, p = config_.pool;
  if (d::shape_size(image.shape()) != h * w) {
    throw ShapeError("encoder: expected " + std::to_string(h) + "x" + std::to_string(w) + " image, got " +
                     d::shape_string(image.shape()));
  }
  Var x = d::avg_pool(d::reshape(image, {h, w}), p);
  x = d::patchify(x, h / p, w / p, config_.patch / p);
  return d::grouped_matmul(x, graph.constant(projection_, "encoder_projection"));
}

Var FeatureEncoder::encode(Graph& graph, Var image) const {
  Var x = project_patches(graph, image);
  return config_.normalize ? d::normalize_rows(x) : x;
}

PatchFeatures FeatureEncoder::encode(const Tensor& image) const {
  Graph g;
  Var raw = project_patches(g, g.constant(image));
  PatchFeatures out{raw.value(), std::vector<bool>(config_.tokens(), false)};
  if (config_.normalize) {
    const Tensor& pre = raw.value();
    for (std::size_t n = 0; n < config_.tokens(); ++n) {
      double s = 0.0;
      for (std::size_t j = 0; j < config_.feature_dim; ++j) s += pre.at(n, j) * pre.at(n, j);
      out.degenerate[n] = std::sqrt(s) < 1e-12;
    }
    out.rows = d::normalize_rows(raw).value();
  }
  return out;
}

Tensor mean_embedding(const Tensor& rows) {
  if (rows.rank() != 2 || rows.dim(0) == 0) throw ShapeError("mean_embedding: expected non-empty [N, D]");
  const std::size_t n = rows.dim(0), dim = rows.dim(1);
  Tensor m({dim});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < dim; ++j) m[j] += rows.at(i, j);
  }
  for (double& v : m.data()) v /= static_cast<double>(n);
  return m;
}

}  // namespace repa::nets
