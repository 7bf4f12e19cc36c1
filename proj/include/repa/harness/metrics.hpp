#pragma once
// Image quality metrics for reconstructions in [0,1].

#include "repa/diffcore/tensor.hpp"

namespace repa::harness {

using diffcore::Tensor;

inline constexpr double kPsnrCap = 99.0;

// 10 log10(1 / MSE) in dB; identical images report kPsnrCap.
double psnr(const Tensor& x, const Tensor& x_hat);

struct SsimConfig {
  std::size_t window = 8;
  double c1 = 1e-4;  // (0.01 L)^2, L = 1
  double c2 = 9e-4;  // (0.03 L)^2
};

// Mean SSIM over every window position (stride 1, uniform weights, population
// statistics). Images are [H, W]; throws ShapeError if smaller than the window.
double ssim(const Tensor& x, const Tensor& x_hat, const SsimConfig& config = {});

}  // namespace repa::harness
