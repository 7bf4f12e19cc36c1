#include <algorithm>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "kernels_internal.hpp"

namespace repa::simd {
namespace {

constexpr KernelTable kScalar{Backend::scalar, "scalar", &detail::dot_scalar,
                              &detail::axpy_scalar, &detail::gemm_scalar};
constexpr KernelTable kAvx2{Backend::avx2, "avx2", &detail::dot_avx2, &detail::axpy_avx2,
                            &detail::gemm_avx2};

bool cpu_has_avx2() {
#if defined(__x86_64__) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable* initial_choice() {
  if (const char* env = std::getenv("REPA_KERNELS")) {
    if (std::string(env) == "scalar") return &kScalar;
  }
  if (const KernelTable* t = avx2_kernels()) return t;
  return &kScalar;
}

const KernelTable*& active() {
  static const KernelTable* table = initial_choice();
  return table;
}

}  // namespace

const KernelTable& scalar_kernels() { return kScalar; }

const KernelTable* avx2_kernels() {
  static const bool ok = detail::avx2_compiled() && cpu_has_avx2();
  return ok ? &kAvx2 : nullptr;
}

const KernelTable& kernels() { return *active(); }

void select_backend(Backend backend) {
  if (backend == Backend::scalar) {
    active() = &kScalar;
    return;
  }
  const KernelTable* t = avx2_kernels();
  if (t == nullptr) throw std::runtime_error("AVX2 kernels unavailable on this machine");
  active() = t;
}

void transpose(const double* src, double* dst, std::size_t rows, std::size_t cols) {
  constexpr std::size_t kTile = 16;
  for (std::size_t i0 = 0; i0 < rows; i0 += kTile) {
    for (std::size_t j0 = 0; j0 < cols; j0 += kTile) {
      const std::size_t i1 = std::min(rows, i0 + kTile);
      const std::size_t j1 = std::min(cols, j0 + kTile);
      for (std::size_t i = i0; i < i1; ++i)
        for (std::size_t j = j0; j < j1; ++j) dst[j * rows + i] = src[i * cols + j];
    }
  }
}

}  // namespace repa::simd
