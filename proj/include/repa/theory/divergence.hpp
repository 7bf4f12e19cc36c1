#pragma once
// Distribution-level feature statistics: the linear-kernel MMD between mean
// embeddings and a diagonal-covariance Frechet distance on pooled patches.

#include <span>

#include "repa/nets/feature_encoder.hpp"

namespace repa::theory {

using diffcore::Tensor;

// ||mean_i p_i - mean_j q_j||^2 for embedding rows p [M, D], q [K, D].
double mmd_mean_embedding(const Tensor& p, const Tensor& q);
// Same over images, each embedded as mu_f(x) = (1/N) sum_n f^[n](x).
double mmd_dino(std::span<const Tensor> p, std::span<const Tensor> q, const nets::FeatureEncoder& encoder);
// ||mu_f(x) - mu_f(x_hat)||^2 for one pair.
double pair_feature_mmd(const Tensor& x, const Tensor& x_hat, const nets::FeatureEncoder& encoder);

// ||m1 - m2||^2 + sum_i (s1_i + s2_i - 2 sqrt(s1_i s2_i)) with unbiased
// per-dimension variances of the rows. Needs at least two rows per side.
double frechet_diagonal(const Tensor& p, const Tensor& q);
// Over images: pooled patch features of each set. Needs two images per set.
double frechet_proxy(std::span<const Tensor> p, std::span<const Tensor> q, const nets::FeatureEncoder& encoder);

// Embedding rows [M, D] and pooled patch rows [M*N, D] of an image set.
Tensor mean_embeddings(std::span<const Tensor> images, const nets::FeatureEncoder& encoder);
Tensor pooled_patches(std::span<const Tensor> images, const nets::FeatureEncoder& encoder);

}  // namespace repa::theory
