// AVX2 variants. This translation unit is compiled with -mavx2; callers
// must check CPU support before dispatching here.

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include "psdm/kernels.hpp"

namespace psdm::kernels {

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d va = _mm256_loadu_pd(a + i);
    const __m256d vb = _mm256_loadu_pd(b + i);
    acc = _mm256_fmadd_pd(va, vb, acc);
  }
  __m128d lo = _mm256_castpd256_pd128(acc);
  __m128d hi = _mm256_extractf128_pd(acc, 1);
  lo = _mm_add_pd(lo, hi);
  double sum = _mm_cvtsd_f64(_mm_add_sd(lo, _mm_unpackhi_pd(lo, lo)));
  for (; i < n; ++i) sum += a[i] * b[i];
  return sum;
}

std::complex<double> dot_cr_avx2(const std::complex<double>* x,
                                 const double* taps, std::size_t n) {
  // acc lanes hold (re, im, re, im) partial sums.
  __m256d acc = _mm256_setzero_pd();
  const double* xd = reinterpret_cast<const double*>(x);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    // (t0, t0, t1, t1)
    const __m128d t = _mm_loadu_pd(taps + i);
    const __m256d tt =
        _mm256_permute4x64_pd(_mm256_castpd128_pd256(t), 0b01010000);
    const __m256d vx = _mm256_loadu_pd(xd + 2 * i);
    acc = _mm256_fmadd_pd(tt, vx, acc);
  }
  __m128d lo = _mm256_castpd256_pd128(acc);
  __m128d hi = _mm256_extractf128_pd(acc, 1);
  lo = _mm_add_pd(lo, hi);
  double re = _mm_cvtsd_f64(lo);
  double im = _mm_cvtsd_f64(_mm_unpackhi_pd(lo, lo));
  for (; i < n; ++i) {
    re += taps[i] * x[i].real();
    im += taps[i] * x[i].imag();
  }
  return {re, im};
}

double energy_avx2(const std::complex<double>* x, std::size_t n) {
  const double* xd = reinterpret_cast<const double*>(x);
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const __m256d vx = _mm256_loadu_pd(xd + 2 * i);
    acc = _mm256_fmadd_pd(vx, vx, acc);
  }
  __m128d lo = _mm256_castpd256_pd128(acc);
  __m128d hi = _mm256_extractf128_pd(acc, 1);
  lo = _mm_add_pd(lo, hi);
  double sum = _mm_cvtsd_f64(_mm_add_sd(lo, _mm_unpackhi_pd(lo, lo)));
  for (; i < n; ++i)
    sum += x[i].real() * x[i].real() + x[i].imag() * x[i].imag();
  return sum;
}

}  // namespace psdm::kernels

#endif  // x86_64
