#include "repa/train/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "repa/errors.hpp"
#include "repa/rng.hpp"

namespace repa::train {

Tensor make_sprite(std::uint64_t seed, std::uint64_t index, const SpriteConfig& config) {
  Rng rng(Rng::derive(seed, index));
  const std::size_t h = config.height, w = config.width;
  if (h == 0 || w == 0) throw ShapeError("make_sprite: empty image");
  // geometry is defined on a 32-pixel reference frame and scaled
  const double sx = w / 32.0, sy = h / 32.0;
  Tensor img = Tensor::full({h, w}, rng.uniform(0.1, 0.3));

  const double amp = rng.uniform(0.05, 0.15);
  const double cycles = rng.uniform(1.5, 4.0);
  const double theta = rng.uniform(0.0, std::numbers::pi);
  const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double k = 2.0 * std::numbers::pi * cycles / 32.0;
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      const double x = (c + 0.5) / sx, y = (r + 0.5) / sy;
      img.at(r, c) += amp * std::sin(k * (std::cos(theta) * x + std::sin(theta) * y) + phase);
    }
  }
  const auto blobs = rng.integer(2, 4);
  for (std::int64_t b = 0; b < blobs; ++b) {
    const double cx = rng.uniform(6.0, 26.0), cy = rng.uniform(6.0, 26.0);
    const double s = rng.uniform(2.5, 6.0), a = rng.uniform(0.3, 0.7);
    for (std::size_t r = 0; r < h; ++r) {
      for (std::size_t c = 0; c < w; ++c) {
        const double dx = (c + 0.5) / sx - cx, dy = (r + 0.5) / sy - cy;
        img.at(r, c) += a * std::exp(-(dx * dx + dy * dy) / (2.0 * s * s));
      }
    }
  }
  for (double& v : img.data()) v = std::clamp(v, 0.0, 1.0);
  return img;
}

std::vector<Tensor> make_sprites(std::uint64_t seed, std::size_t count, const SpriteConfig& config,
                                 std::size_t first) {
  std::vector<Tensor> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(make_sprite(seed, first + i, config));
  return out;
}

Tensor stack_rows(const std::vector<Tensor>& items) {
  if (items.empty()) throw ShapeError("stack_rows: empty set");
  const std::size_t k = items.front().size();
  Tensor out({items.size(), k});
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (items[i].size() != k) throw ShapeError("stack_rows: ragged items");
    std::copy(items[i].data().begin(), items[i].data().end(), out.ptr() + i * k);
  }
  return out;
}

Tensor row(const Tensor& matrix, std::size_t i, diffcore::Shape shape) {
  if (matrix.rank() != 2 || i >= matrix.dim(0)) throw ShapeError("row: index out of range");
  const std::size_t k = matrix.dim(1);
  if (diffcore::shape_size(shape) != k) throw ShapeError("row: shape does not match row length");
  return Tensor(std::move(shape), std::vector<double>(matrix.ptr() + i * k, matrix.ptr() + (i + 1) * k));
}

std::uint64_t heldout_seed(std::uint64_t seed) { return Rng::derive(seed, 0x4e1d07u); }

}  // namespace repa::train
