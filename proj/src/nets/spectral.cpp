#include "repa/nets/spectral.hpp"

#include <cmath>

#include "repa/errors.hpp"
#include "repa/rng.hpp"

namespace repa::nets {

using diffcore::Tensor;

SpectralEstimate spectral_norm(const Tensor& m, double tolerance, std::size_t max_iterations) {
  if (m.rank() != 2 || m.size() == 0) throw ShapeError("spectral_norm: expected a non-empty matrix");
  const std::size_t rows = m.dim(0), cols = m.dim(1);
  Rng rng(0x9e3779b9);
  std::vector<double> v(cols), u(rows);
  for (double& x : v) x = rng.normal();
  SpectralEstimate est;
  double prev = -1.0;
  std::size_t stable = 0;
  for (std::size_t it = 1; it <= max_iterations; ++it) {
    double vn = 0.0;
    for (double x : v) vn += x * x;
    vn = std::sqrt(vn);
    if (vn == 0.0) return est;  // zero matrix
    for (double& x : v) x /= vn;
    for (std::size_t r = 0; r < rows; ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < cols; ++c) s += m.at(r, c) * v[c];
      u[r] = s;
    }
    double un = 0.0;
    for (double x : u) un += x * x;
    est.value = std::sqrt(un);
    est.iterations = it;
    for (std::size_t c = 0; c < cols; ++c) {
      double s = 0.0;
      for (std::size_t r = 0; r < rows; ++r) s += m.at(r, c) * u[r];
      v[c] = s;
    }
    // require a few consecutive agreements: the estimate can stall briefly
    if (prev >= 0.0 && std::abs(est.value - prev) <= tolerance * est.value) {
      if (++stable >= 5) {
        est.converged = true;
        return est;
      }
    } else {
      stable = 0;
    }
    prev = est.value;
  }
  return est;
}

}  // namespace repa::nets
