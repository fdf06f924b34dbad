// Compiled with -mavx2 -mfma; only reached after a runtime CPU check.

#include "tac/kernels.hpp"

#if defined(TAC_HAVE_AVX2)
#include <immintrin.h>

namespace tac::kernels {
namespace {

double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d sw = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, sw));
}

void accumulate_taps_avx2(double* out, std::size_t n, const double* const* rows, const double* weights,
                          std::size_t ntaps) {
  std::size_t t = 0;
  for (; t + 16 <= n; t += 16) {
    __m256d a0 = _mm256_loadu_pd(out + t);
    __m256d a1 = _mm256_loadu_pd(out + t + 4);
    __m256d a2 = _mm256_loadu_pd(out + t + 8);
    __m256d a3 = _mm256_loadu_pd(out + t + 12);
    for (std::size_t k = 0; k < ntaps; ++k) {
      const __m256d w = _mm256_broadcast_sd(weights + k);
      const double* r = rows[k] + t;
      a0 = _mm256_fmadd_pd(w, _mm256_loadu_pd(r), a0);
      a1 = _mm256_fmadd_pd(w, _mm256_loadu_pd(r + 4), a1);
      a2 = _mm256_fmadd_pd(w, _mm256_loadu_pd(r + 8), a2);
      a3 = _mm256_fmadd_pd(w, _mm256_loadu_pd(r + 12), a3);
    }
    _mm256_storeu_pd(out + t, a0);
    _mm256_storeu_pd(out + t + 4, a1);
    _mm256_storeu_pd(out + t + 8, a2);
    _mm256_storeu_pd(out + t + 12, a3);
  }
  for (; t + 4 <= n; t += 4) {
    __m256d a0 = _mm256_loadu_pd(out + t);
    for (std::size_t k = 0; k < ntaps; ++k)
      a0 = _mm256_fmadd_pd(_mm256_broadcast_sd(weights + k), _mm256_loadu_pd(rows[k] + t), a0);
    _mm256_storeu_pd(out + t, a0);
  }
  for (; t < n; ++t) {
    double acc = out[t];
    for (std::size_t k = 0; k < ntaps; ++k) acc += weights[k] * rows[k][t];
    out[t] = acc;
  }
}

void dot_taps_avx2(const double* a, std::size_t n, const double* const* rows, double* results, std::size_t nrows) {
  std::size_t k = 0;
  for (; k + 4 <= nrows; k += 4) {
    const double* r0 = rows[k];
    const double* r1 = rows[k + 1];
    const double* r2 = rows[k + 2];
    const double* r3 = rows[k + 3];
    __m256d s0 = _mm256_setzero_pd(), s1 = _mm256_setzero_pd(), s2 = _mm256_setzero_pd(), s3 = _mm256_setzero_pd();
    std::size_t t = 0;
    for (; t + 4 <= n; t += 4) {
      const __m256d av = _mm256_loadu_pd(a + t);
      s0 = _mm256_fmadd_pd(av, _mm256_loadu_pd(r0 + t), s0);
      s1 = _mm256_fmadd_pd(av, _mm256_loadu_pd(r1 + t), s1);
      s2 = _mm256_fmadd_pd(av, _mm256_loadu_pd(r2 + t), s2);
      s3 = _mm256_fmadd_pd(av, _mm256_loadu_pd(r3 + t), s3);
    }
    double d0 = hsum(s0), d1 = hsum(s1), d2 = hsum(s2), d3 = hsum(s3);
    for (; t < n; ++t) {
      d0 += a[t] * r0[t];
      d1 += a[t] * r1[t];
      d2 += a[t] * r2[t];
      d3 += a[t] * r3[t];
    }
    results[k] += d0;
    results[k + 1] += d1;
    results[k + 2] += d2;
    results[k + 3] += d3;
  }
  for (; k < nrows; ++k) {
    const double* r = rows[k];
    __m256d s = _mm256_setzero_pd();
    std::size_t t = 0;
    for (; t + 4 <= n; t += 4) s = _mm256_fmadd_pd(_mm256_loadu_pd(a + t), _mm256_loadu_pd(r + t), s);
    double d = hsum(s);
    for (; t < n; ++t) d += a[t] * r[t];
    results[k] += d;
  }
}

}  // namespace

const KernelTable* avx2_table() {
  static const KernelTable table{Isa::avx2, "avx2", &accumulate_taps_avx2, &dot_taps_avx2};
  return &table;
}

}  // namespace tac::kernels

#else

namespace tac::kernels {
const KernelTable* avx2_table() { return nullptr; }
}  // namespace tac::kernels

#endif
