#pragma once
// Linear measurement operators y = A x + n on single-channel images, with an
// explicit adjoint and a differentiable path.

#include <cstdint>
#include <string>
#include <string_view>

#include "repa/diffcore/graph.hpp"
#include "repa/rng.hpp"

namespace repa::degrade {

using diffcore::Graph;
using diffcore::Shape;
using diffcore::Tensor;
using diffcore::Var;

enum class Kind { superres, boxinpaint, gaussblur, motionblur };

std::string_view kind_name(Kind kind);
Kind parse_kind(std::string_view name);  // throws ConfigError

// Normalized size x size Gaussian (size odd).
Tensor gaussian_kernel(std::size_t size, double sigma);

// Line-like kernel of odd `length`: a segment through the centre with
// half-length intensity * (length - 1) / 2, rendered by a Gaussian of width
// `intensity` pixels along it, then normalized. angle_free draws the angle
// from the seed; otherwise the segment is horizontal. Intensity 0 gives the
// single-pixel identity kernel.
Tensor make_motion_kernel(std::uint64_t seed, std::size_t length, bool angle_free, double intensity);

class DegradationOp {
 public:
  static DegradationOp superres(std::size_t height, std::size_t width, std::size_t factor, double noise_std);
  static DegradationOp box_inpaint(std::size_t height, std::size_t width, std::size_t row, std::size_t col,
                                   std::size_t size, double noise_std);
  static DegradationOp blur(Kind kind, std::size_t height, std::size_t width, Tensor kernel, double noise_std);

  // Desk-scale defaults for a 32x32 image: SR x4, centred 16x16 box, 9x9
  // Gaussian with sigma 1.5, length-7 motion kernel with intensity 0.5,
  // noise 0.01.
  static DegradationOp desk(Kind kind, std::size_t height = 32, std::size_t width = 32, std::uint64_t seed = 0,
                            double noise_std = 0.01);

  Kind kind() const noexcept { return kind_; }
  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t factor() const noexcept { return factor_; }
  double noise_std() const noexcept { return noise_std_; }
  const Tensor& kernel() const noexcept { return kernel_; }
  const Tensor& mask() const noexcept { return mask_; }
  Shape input_shape() const { return {height_, width_}; }
  Shape output_shape() const;
  std::string describe() const;

  // Noiseless A x; x must hold H*W values.
  Tensor forward(const Tensor& x) const;
  // A x + n with n ~ N(0, noise_std^2); x must lie in [0,1].
  Tensor apply(const Tensor& x, Rng& rng) const;
  Tensor adjoint(const Tensor& y) const;
  Var forward(Graph& graph, Var x) const;

  // Measurement mapped back to image shape for feature extraction:
  // nearest-neighbour upsampling for super-resolution, identity otherwise.
  Tensor measurement_image(const Tensor& y) const;

 private:
  DegradationOp(Kind kind, std::size_t height, std::size_t width, double noise_std);

  Kind kind_;
  std::size_t height_, width_;
  double noise_std_;
  std::size_t factor_ = 1;
  Tensor kernel_;
  Tensor mask_;
};

}  // namespace repa::degrade
