#include "kernels_internal.hpp"

#if defined(__x86_64__) && (defined(__GNUC__) || defined(__clang__))
#define REPA_HAVE_AVX2_VARIANT 1
#include <immintrin.h>
#else
#define REPA_HAVE_AVX2_VARIANT 0
#endif

namespace repa::simd::detail {

#if REPA_HAVE_AVX2_VARIANT

#define REPA_AVX2 __attribute__((target("avx2,fma")))

bool avx2_compiled() { return true; }

REPA_AVX2 static inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

REPA_AVX2 double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

REPA_AVX2 void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

// 4x8 register-blocked micro kernel over the full k extent.
REPA_AVX2 static void block_4x8(std::size_t n, std::size_t k, const double* a,
                                const double* b, double* c) {
  __m256d c00 = _mm256_loadu_pd(c), c01 = _mm256_loadu_pd(c + 4);
  __m256d c10 = _mm256_loadu_pd(c + n), c11 = _mm256_loadu_pd(c + n + 4);
  __m256d c20 = _mm256_loadu_pd(c + 2 * n), c21 = _mm256_loadu_pd(c + 2 * n + 4);
  __m256d c30 = _mm256_loadu_pd(c + 3 * n), c31 = _mm256_loadu_pd(c + 3 * n + 4);
  const double* a0 = a;
  const double* a1 = a + k;
  const double* a2 = a + 2 * k;
  const double* a3 = a + 3 * k;
  for (std::size_t p = 0; p < k; ++p) {
    const __m256d b0 = _mm256_loadu_pd(b + p * n);
    const __m256d b1 = _mm256_loadu_pd(b + p * n + 4);
    __m256d av = _mm256_broadcast_sd(a0 + p);
    c00 = _mm256_fmadd_pd(av, b0, c00);
    c01 = _mm256_fmadd_pd(av, b1, c01);
    av = _mm256_broadcast_sd(a1 + p);
    c10 = _mm256_fmadd_pd(av, b0, c10);
    c11 = _mm256_fmadd_pd(av, b1, c11);
    av = _mm256_broadcast_sd(a2 + p);
    c20 = _mm256_fmadd_pd(av, b0, c20);
    c21 = _mm256_fmadd_pd(av, b1, c21);
    av = _mm256_broadcast_sd(a3 + p);
    c30 = _mm256_fmadd_pd(av, b0, c30);
    c31 = _mm256_fmadd_pd(av, b1, c31);
  }
  _mm256_storeu_pd(c, c00);
  _mm256_storeu_pd(c + 4, c01);
  _mm256_storeu_pd(c + n, c10);
  _mm256_storeu_pd(c + n + 4, c11);
  _mm256_storeu_pd(c + 2 * n, c20);
  _mm256_storeu_pd(c + 2 * n + 4, c21);
  _mm256_storeu_pd(c + 3 * n, c30);
  _mm256_storeu_pd(c + 3 * n + 4, c31);
}

REPA_AVX2 static void block_4x4(std::size_t n, std::size_t k, const double* a,
                                const double* b, double* c) {
  __m256d c0 = _mm256_loadu_pd(c);
  __m256d c1 = _mm256_loadu_pd(c + n);
  __m256d c2 = _mm256_loadu_pd(c + 2 * n);
  __m256d c3 = _mm256_loadu_pd(c + 3 * n);
  for (std::size_t p = 0; p < k; ++p) {
    const __m256d bv = _mm256_loadu_pd(b + p * n);
    c0 = _mm256_fmadd_pd(_mm256_broadcast_sd(a + p), bv, c0);
    c1 = _mm256_fmadd_pd(_mm256_broadcast_sd(a + k + p), bv, c1);
    c2 = _mm256_fmadd_pd(_mm256_broadcast_sd(a + 2 * k + p), bv, c2);
    c3 = _mm256_fmadd_pd(_mm256_broadcast_sd(a + 3 * k + p), bv, c3);
  }
  _mm256_storeu_pd(c, c0);
  _mm256_storeu_pd(c + n, c1);
  _mm256_storeu_pd(c + 2 * n, c2);
  _mm256_storeu_pd(c + 3 * n, c3);
}

REPA_AVX2 void gemm_avx2(std::size_t m, std::size_t n, std::size_t k, const double* a,
                         const double* b, double* c, bool accumulate) {
  if (!accumulate) {
    const __m256d z = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= m * n; i += 4) _mm256_storeu_pd(c + i, z);
    for (; i < m * n; ++i) c[i] = 0.0;
  }
  std::size_t i = 0;
  for (; i + 4 <= m; i += 4) {
    std::size_t j = 0;
    for (; j + 8 <= n; j += 8) block_4x8(n, k, a + i * k, b + j, c + i * n + j);
    for (; j + 4 <= n; j += 4) block_4x4(n, k, a + i * k, b + j, c + i * n + j);
    for (; j < n; ++j) {
      for (std::size_t r = 0; r < 4; ++r) {
        double s = c[(i + r) * n + j];
        const double* arow = a + (i + r) * k;
        for (std::size_t p = 0; p < k; ++p) s += arow[p] * b[p * n + j];
        c[(i + r) * n + j] = s;
      }
    }
  }
  for (; i < m; ++i) {
    double* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) axpy_avx2(a[i * k + p], b + p * n, crow, n);
  }
}

#else

bool avx2_compiled() { return false; }
double dot_avx2(const double* a, const double* b, std::size_t n) { return dot_scalar(a, b, n); }
void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) { axpy_scalar(alpha, x, y, n); }
void gemm_avx2(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
               double* c, bool accumulate) {
  gemm_scalar(m, n, k, a, b, c, accumulate);
}

#endif

}  // namespace repa::simd::detail
