#pragma once
// Fixed patch encoder standing in for a pretrained vision backbone: each
// patch is average-pooled (low-pass), flattened, multiplied by its own seeded
// Gaussian matrix and optionally normalized to unit length.

#include <vector>

#include "repa/diffcore/graph.hpp"

namespace repa::nets {

using diffcore::Graph;
using diffcore::Tensor;
using diffcore::Var;

struct EncoderConfig {
  std::size_t height = 32;
  std::size_t width = 32;
  std::size_t patch = 8;
  std::size_t pool = 2;
  std::size_t feature_dim = 32;
  bool normalize = true;
  std::uint64_t seed = 0x5eed0f;

  std::size_t tokens() const { return (height / patch) * (width / patch); }
  void validate() const;
};

// N x D1 per-patch features. degenerate[n] marks rows that were all-zero
// before normalization and were replaced by the fixed unit vector.
struct PatchFeatures {
  Tensor rows;
  std::vector<bool> degenerate;

  std::size_t degenerate_count() const;
};

class FeatureEncoder {
 public:
  explicit FeatureEncoder(const EncoderConfig& config = {});

  const EncoderConfig& config() const noexcept { return config_; }
  std::size_t tokens() const { return config_.tokens(); }
  std::size_t feature_dim() const { return config_.feature_dim; }
  const Tensor& projection() const noexcept { return projection_; }  // [N, K, D1]

  // image: H*W elements in any shape.
  PatchFeatures encode(const Tensor& image) const;
  // Differentiable path; returns [N, D1].
  Var encode(Graph& graph, Var image) const;

 private:
  Var project_patches(Graph& graph, Var image) const;

  EncoderConfig config_;
  Tensor projection_;
};

// Mean over patches, (1/N) sum_n f^[n].
Tensor mean_embedding(const Tensor& rows);

}  // namespace repa::nets
