#include "repa/degrade/degrade.hpp"

#include <cmath>
#include <numbers>

#include "repa/diffcore/ops.hpp"
#include "repa/errors.hpp"

namespace repa::degrade {

namespace d = repa::diffcore;

std::string_view kind_name(Kind kind) {
  switch (kind) {
    case Kind::superres: return "superres";
    case Kind::boxinpaint: return "boxinpaint";
    case Kind::gaussblur: return "gaussblur";
    case Kind::motionblur: return "motionblur";
  }
  return "?";
}

Kind parse_kind(std::string_view name) {
  for (Kind k : {Kind::superres, Kind::boxinpaint, Kind::gaussblur, Kind::motionblur}) {
    if (kind_name(k) == name) return k;
  }
  throw ConfigError("unknown degradation '" + std::string(name) +
                    "' (expected superres|boxinpaint|gaussblur|motionblur)");
}

namespace {

Tensor normalized(Tensor k) {
  double s = 0.0;
  for (double v : k.data()) s += v;
  for (double& v : k.data()) v /= s;
  return k;
}

Tensor flipped(const Tensor& k) {
  Tensor f(k.shape());
  for (std::size_t i = 0; i < k.size(); ++i) f[i] = k[k.size() - 1 - i];
  return f;
}

}  // namespace

Tensor gaussian_kernel(std::size_t size, double sigma) {
  if (size % 2 == 0) throw ShapeError("gaussian_kernel: size must be odd");
  if (!(sigma > 0.0)) throw ShapeError("gaussian_kernel: sigma must be positive");
  const double c = static_cast<double>(size / 2);
  Tensor k({size, size});
  for (std::size_t r = 0; r < size; ++r) {
    for (std::size_t q = 0; q < size; ++q) {
      const double dy = r - c, dx = q - c;
      k.at(r, q) = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
    }
  }
  return normalized(std::move(k));
}

Tensor make_motion_kernel(std::uint64_t seed, std::size_t length, bool angle_free, double intensity) {
  if (length < 3 || length % 2 == 0) throw ShapeError("make_motion_kernel: length must be odd and >= 3");
  if (!(intensity >= 0.0 && intensity <= 1.0)) throw ShapeError("make_motion_kernel: intensity outside [0,1]");
  Tensor k({length, length});
  const double c = static_cast<double>(length / 2);
  if (intensity == 0.0) {
    k.at(length / 2, length / 2) = 1.0;
    return k;
  }
  Rng rng(seed);
  const double angle = angle_free ? rng.uniform(0.0, std::numbers::pi) : 0.0;
  const double half = intensity * (length - 1) / 2.0, width = intensity;
  const int samples = 33;
  for (int s = 0; s < samples; ++s) {
    const double u = -half + 2.0 * half * s / (samples - 1);
    const double px = c + u * std::cos(angle), py = c + u * std::sin(angle);
    for (std::size_t r = 0; r < length; ++r) {
      for (std::size_t q = 0; q < length; ++q) {
        const double dx = q - px, dy = r - py;
        k.at(r, q) += std::exp(-(dx * dx + dy * dy) / (2.0 * width * width));
      }
    }
  }
  return normalized(std::move(k));
}

DegradationOp::DegradationOp(Kind kind, std::size_t height, std::size_t width, double noise_std)
    : kind_(kind), height_(height), width_(width), noise_std_(noise_std) {
  if (height == 0 || width == 0) throw ShapeError("degradation: empty image");
  if (!(noise_std >= 0.0)) throw ShapeError("degradation: noise_std must be >= 0");
}

DegradationOp DegradationOp::superres(std::size_t height, std::size_t width, std::size_t factor, double noise_std) {
  DegradationOp op(Kind::superres, height, width, noise_std);
  if (factor == 0 || height % factor || width % factor) throw ShapeError("superres: factor must divide the image");
  op.factor_ = factor;
  return op;
}

DegradationOp DegradationOp::box_inpaint(std::size_t height, std::size_t width, std::size_t row, std::size_t col,
                                         std::size_t size, double noise_std) {
  DegradationOp op(Kind::boxinpaint, height, width, noise_std);
  if (row + size > height || col + size > width) throw ShapeError("boxinpaint: box outside the image");
  op.mask_ = Tensor::full({height, width}, 1.0);
  for (std::size_t r = row; r < row + size; ++r) {
    for (std::size_t q = col; q < col + size; ++q) op.mask_.at(r, q) = 0.0;
  }
  return op;
}

DegradationOp DegradationOp::blur(Kind kind, std::size_t height, std::size_t width, Tensor kernel,
                                  double noise_std) {
  if (kind != Kind::gaussblur && kind != Kind::motionblur) throw ShapeError("blur: kind must be a blur");
  DegradationOp op(kind, height, width, noise_std);
  if (kernel.rank() != 2 || kernel.dim(0) % 2 == 0 || kernel.dim(1) % 2 == 0) {
    throw ShapeError("blur: kernel must be 2-D with odd sides");
  }
  if (kernel.dim(0) > height || kernel.dim(1) > width) throw ShapeError("blur: kernel larger than image");
  op.kernel_ = std::move(kernel);
  return op;
}

DegradationOp DegradationOp::desk(Kind kind, std::size_t height, std::size_t width, std::uint64_t seed,
                                  double noise_std) {
  switch (kind) {
    case Kind::superres: return superres(height, width, 4, noise_std);
    case Kind::boxinpaint: {
      const std::size_t size = std::min(height, width) / 2;
      return box_inpaint(height, width, (height - size) / 2, (width - size) / 2, size, noise_std);
    }
    case Kind::gaussblur: return blur(kind, height, width, gaussian_kernel(9, 1.5), noise_std);
    case Kind::motionblur: return blur(kind, height, width, make_motion_kernel(seed, 7, true, 0.5), noise_std);
  }
  throw ConfigError("desk: unknown kind");
}

Shape DegradationOp::output_shape() const {
  if (kind_ == Kind::superres) return {height_ / factor_, width_ / factor_};
  return {height_, width_};
}

std::string DegradationOp::describe() const {
  std::string s(kind_name(kind_));
  if (kind_ == Kind::superres) s += " x" + std::to_string(factor_);
  if (!kernel_.empty()) s += " kernel " + d::shape_string(kernel_.shape());
  return s + " noise " + std::to_string(noise_std_);
}

Var DegradationOp::forward(Graph&, Var x) const {
  if (d::shape_size(x.shape()) != height_ * width_) {
    throw ShapeError("degradation: expected " + std::to_string(height_) + "x" + std::to_string(width_) +
                     " image, got " + d::shape_string(x.shape()));
  }
  Var img = x.shape() == input_shape() ? x : d::reshape(x, input_shape());
  switch (kind_) {
    case Kind::superres: return d::avg_pool(img, factor_);
    case Kind::boxinpaint: return d::mask(img, mask_);
    case Kind::gaussblur:
    case Kind::motionblur: return d::conv2d(img, kernel_);
  }
  throw ShapeError("degradation: unknown kind");
}

Tensor DegradationOp::forward(const Tensor& x) const {
  Graph g;
  return forward(g, g.constant(x)).value();
}

Tensor DegradationOp::apply(const Tensor& x, Rng& rng) const {
  for (double v : x.data()) {
    if (!(v >= 0.0 && v <= 1.0)) throw ShapeError("degradation: input outside [0,1]");
  }
  Tensor y = forward(x);
  if (noise_std_ > 0.0) {
    for (double& v : y.data()) v += noise_std_ * rng.normal();
  }
  return y;
}

Tensor DegradationOp::adjoint(const Tensor& y) const {
  if (y.shape() != output_shape()) {
    throw ShapeError("adjoint: expected " + d::shape_string(output_shape()) + ", got " + d::shape_string(y.shape()));
  }
  Graph g;
  Var v = g.constant(y);
  switch (kind_) {
    case Kind::superres: {
      const double inv = 1.0 / static_cast<double>(factor_ * factor_);
      return d::scale(d::upsample_nearest(v, factor_), inv).value();
    }
    case Kind::boxinpaint: return d::mask(v, mask_).value();
    case Kind::gaussblur:
    case Kind::motionblur: return d::conv2d(v, flipped(kernel_)).value();
  }
  throw ShapeError("adjoint: unknown kind");
}

Tensor DegradationOp::measurement_image(const Tensor& y) const {
  if (y.shape() != output_shape()) throw ShapeError("measurement_image: unexpected measurement shape");
  if (kind_ != Kind::superres) return y;
  Graph g;
  return d::upsample_nearest(g.constant(y), factor_).value();
}

}  // namespace repa::degrade
