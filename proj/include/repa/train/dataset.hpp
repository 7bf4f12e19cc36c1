#pragma once
// Procedural "textured sprite" images: a flat background, an oriented
// sinusoidal texture and 2-4 Gaussian blobs, clamped to [0,1]. Image i of a
// set depends only on (seed, i), so sets are prefix-stable and can be
// generated in any order.

#include <cstdint>
#include <vector>

#include "repa/diffcore/tensor.hpp"

namespace repa::train {

using diffcore::Tensor;

inline constexpr int kSpriteGeneratorVersion = 1;

struct SpriteConfig {
  std::size_t height = 32;
  std::size_t width = 32;
};

Tensor make_sprite(std::uint64_t seed, std::uint64_t index, const SpriteConfig& config = {});
std::vector<Tensor> make_sprites(std::uint64_t seed, std::size_t count, const SpriteConfig& config = {},
                                 std::size_t first = 0);

// Rows of flattened images: [n, H*W].
Tensor stack_rows(const std::vector<Tensor>& items);
// Row i of a [n, k] matrix as a tensor of the given shape.
Tensor row(const Tensor& matrix, std::size_t i, diffcore::Shape shape);

// Default split: training images are indices [0, 4096) of the data seed,
// held-out images use a separate stream.
struct SplitConfig {
  std::uint64_t seed = 2024;
  std::size_t train = 4096;
  std::size_t heldout = 512;
};
std::uint64_t heldout_seed(std::uint64_t seed);

}  // namespace repa::train
