#include "repa/theory/divergence.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "repa/errors.hpp"

namespace repa::theory {

namespace {

void require_pair(const char* op, const Tensor& p, const Tensor& q, std::size_t min_rows) {
  if (p.rank() != 2 || q.rank() != 2 || p.dim(1) != q.dim(1)) {
    throw ShapeError(std::string(op) + ": expected [M, D] and [K, D], got " + diffcore::shape_string(p.shape()) +
                     " and " + diffcore::shape_string(q.shape()));
  }
  if (p.dim(0) < min_rows || q.dim(0) < min_rows) {
    throw ShapeError(std::string(op) + ": needs at least " + std::to_string(min_rows) + " rows per side");
  }
}

std::vector<double> column_means(const Tensor& m) {
  const std::size_t rows = m.dim(0), d = m.dim(1);
  std::vector<double> mu(d, 0.0);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < d; ++c) mu[c] += m.at(r, c);
  for (double& v : mu) v /= static_cast<double>(rows);
  return mu;
}

std::vector<double> column_variances(const Tensor& m, const std::vector<double>& mu) {
  const std::size_t rows = m.dim(0), d = m.dim(1);
  std::vector<double> var(d, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < d; ++c) {
      const double e = m.at(r, c) - mu[c];
      var[c] += e * e;
    }
  }
  for (double& v : var) v /= static_cast<double>(rows - 1);
  return var;
}

double squared_gap(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

}  // namespace

double mmd_mean_embedding(const Tensor& p, const Tensor& q) {
  require_pair("mmd", p, q, 1);
  return squared_gap(column_means(p), column_means(q));
}

Tensor mean_embeddings(std::span<const Tensor> images, const nets::FeatureEncoder& encoder) {
  const std::size_t d = encoder.feature_dim();
  Tensor out({images.size(), d});
  for (std::size_t i = 0; i < images.size(); ++i) {
    const Tensor mu = nets::mean_embedding(encoder.encode(images[i]).rows);
    for (std::size_t c = 0; c < d; ++c) out.at(i, c) = mu[c];
  }
  return out;
}

Tensor pooled_patches(std::span<const Tensor> images, const nets::FeatureEncoder& encoder) {
  const std::size_t n = encoder.tokens(), d = encoder.feature_dim();
  Tensor out({images.size() * n, d});
  for (std::size_t i = 0; i < images.size(); ++i) {
    const Tensor rows = encoder.encode(images[i]).rows;
    std::copy(rows.vec().begin(), rows.vec().end(), out.ptr() + i * n * d);
  }
  return out;
}

double mmd_dino(std::span<const Tensor> p, std::span<const Tensor> q, const nets::FeatureEncoder& encoder) {
  if (p.empty() || q.empty()) throw ShapeError("mmd_dino: empty image set");
  return mmd_mean_embedding(mean_embeddings(p, encoder), mean_embeddings(q, encoder));
}

double pair_feature_mmd(const Tensor& x, const Tensor& x_hat, const nets::FeatureEncoder& encoder) {
  if (x.size() != x_hat.size()) throw ShapeError("pair_feature_mmd: image sizes differ");
  const Tensor a = nets::mean_embedding(encoder.encode(x).rows);
  const Tensor b = nets::mean_embedding(encoder.encode(x_hat).rows);
  return diffcore::squared_norm(a - b);
}

double frechet_diagonal(const Tensor& p, const Tensor& q) {
  require_pair("frechet", p, q, 2);
  const auto mp = column_means(p), mq = column_means(q);
  const auto vp = column_variances(p, mp), vq = column_variances(q, mq);
  double trace = 0.0;
  for (std::size_t i = 0; i < vp.size(); ++i) trace += vp[i] + vq[i] - 2.0 * std::sqrt(vp[i] * vq[i]);
  return squared_gap(mp, mq) + trace;
}

double frechet_proxy(std::span<const Tensor> p, std::span<const Tensor> q, const nets::FeatureEncoder& encoder) {
  if (p.size() < 2 || q.size() < 2) throw ShapeError("frechet_proxy: needs at least two images per set");
  return frechet_diagonal(pooled_patches(p, encoder), pooled_patches(q, encoder));
}

}  // namespace repa::theory
