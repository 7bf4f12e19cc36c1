#pragma once

#include "repa/diffcore/tensor.hpp"

namespace repa::nets {

struct SpectralEstimate {
  double value = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
};

// Largest singular value of a matrix by power iteration on M^T M, started
// from a fixed pseudo-random vector. Stops when successive estimates agree to
// `tolerance` (relative).
SpectralEstimate spectral_norm(const diffcore::Tensor& m, double tolerance = 1e-15,
                               std::size_t max_iterations = 200000);

}  // namespace repa::nets
