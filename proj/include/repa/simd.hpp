#pragma once
// Dense double-precision kernels used by the differentiation substrate.
//
// Every kernel has a portable scalar reference implementation. On x86-64 an
// AVX2+FMA variant is compiled with function-level target attributes and
// selected at runtime when the CPU supports it. The environment variable
// REPA_KERNELS=scalar forces the reference path.

#include <cstddef>
#include <string_view>

namespace repa::simd {

enum class Backend { scalar, avx2 };

struct KernelTable {
  Backend backend;
  std::string_view name;
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // C[m x n] (+)= A[m x k] * B[k x n]; all row-major and contiguous.
  void (*gemm)(std::size_t m, std::size_t n, std::size_t k, const double* a,
               const double* b, double* c, bool accumulate);
};

const KernelTable& scalar_kernels();

// nullptr when the variant was not compiled in or the CPU lacks AVX2/FMA.
const KernelTable* avx2_kernels();

// The table in use; chosen once on first call.
const KernelTable& kernels();

// Overrides the runtime choice. Throws std::runtime_error when the requested
// backend is unavailable on this machine.
void select_backend(Backend backend);

// Convenience wrappers over kernels().
inline double dot(const double* a, const double* b, std::size_t n) {
  return kernels().dot(a, b, n);
}
inline void axpy(double alpha, const double* x, double* y, std::size_t n) {
  kernels().axpy(alpha, x, y, n);
}
inline void gemm(std::size_t m, std::size_t n, std::size_t k, const double* a,
                 const double* b, double* c, bool accumulate) {
  kernels().gemm(m, n, k, a, b, c, accumulate);
}

// Out-of-place transpose of a row-major [rows x cols] matrix.
void transpose(const double* src, double* dst, std::size_t rows, std::size_t cols);

}  // namespace repa::simd
