#include "repa/harness/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "repa/errors.hpp"

namespace repa::harness {

namespace {

void require_same(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape() || a.empty()) {
    throw ShapeError(std::string(op) + ": shapes " + diffcore::shape_string(a.shape()) + " and " +
                     diffcore::shape_string(b.shape()) + " differ");
  }
}

// Summed-area table with a zero first row and column: [(H+1) x (W+1)].
std::vector<double> integral(std::size_t h, std::size_t w, auto&& value) {
  std::vector<double> s((h + 1) * (w + 1), 0.0);
  for (std::size_t r = 0; r < h; ++r) {
    double row = 0.0;
    for (std::size_t c = 0; c < w; ++c) {
      row += value(r * w + c);
      s[(r + 1) * (w + 1) + c + 1] = s[r * (w + 1) + c + 1] + row;
    }
  }
  return s;
}

double box(const std::vector<double>& s, std::size_t w, std::size_t r, std::size_t c, std::size_t k) {
  const std::size_t stride = w + 1;
  return s[(r + k) * stride + c + k] - s[r * stride + c + k] - s[(r + k) * stride + c] + s[r * stride + c];
}

}  // namespace

double psnr(const Tensor& x, const Tensor& x_hat) {
  require_same("psnr", x, x_hat);
  double se = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) se += (x[i] - x_hat[i]) * (x[i] - x_hat[i]);
  const double mse = se / static_cast<double>(x.size());
  if (mse == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, -10.0 * std::log10(mse));
}

double ssim(const Tensor& x, const Tensor& x_hat, const SsimConfig& config) {
  require_same("ssim", x, x_hat);
  if (x.rank() != 2) throw ShapeError("ssim: expected an [H, W] image");
  const std::size_t h = x.dim(0), w = x.dim(1), k = config.window;
  if (k == 0 || h < k || w < k) {
    throw ShapeError("ssim: image " + diffcore::shape_string(x.shape()) + " smaller than the " +
                     std::to_string(k) + "x" + std::to_string(k) + " window");
  }
  const auto sx = integral(h, w, [&](std::size_t i) { return x[i]; });
  const auto sy = integral(h, w, [&](std::size_t i) { return x_hat[i]; });
  const auto sxx = integral(h, w, [&](std::size_t i) { return x[i] * x[i]; });
  const auto syy = integral(h, w, [&](std::size_t i) { return x_hat[i] * x_hat[i]; });
  const auto sxy = integral(h, w, [&](std::size_t i) { return x[i] * x_hat[i]; });
  const double n = static_cast<double>(k * k);
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t r = 0; r + k <= h; ++r) {
    for (std::size_t c = 0; c + k <= w; ++c) {
      const double mx = box(sx, w, r, c, k) / n, my = box(sy, w, r, c, k) / n;
      const double vx = std::max(0.0, box(sxx, w, r, c, k) / n - mx * mx);
      const double vy = std::max(0.0, box(syy, w, r, c, k) / n - my * my);
      const double cxy = box(sxy, w, r, c, k) / n - mx * my;
      total += ((2.0 * mx * my + config.c1) * (2.0 * cxy + config.c2)) /
               ((mx * mx + my * my + config.c1) * (vx + vy + config.c2));
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

}  // namespace repa::harness
