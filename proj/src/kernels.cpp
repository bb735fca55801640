#include "psdm/kernels.hpp"

#include <cstdlib>

namespace psdm::kernels {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

std::complex<double> dot_cr_scalar(const std::complex<double>* x,
                                   const double* taps, std::size_t n) {
  double re = 0.0, im = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    re += taps[i] * x[i].real();
    im += taps[i] * x[i].imag();
  }
  return {re, im};
}

double energy_scalar(const std::complex<double>* x, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    acc += x[i].real() * x[i].real() + x[i].imag() * x[i].imag();
  return acc;
}

namespace {

bool use_avx2() {
#if defined(__x86_64__) || defined(_M_X64)
  static const bool ok = [] {
    if (std::getenv("PSDM_NO_SIMD") != nullptr) return false;
    return static_cast<bool>(__builtin_cpu_supports("avx2"));
  }();
  return ok;
#else
  return false;
#endif
}

}  // namespace

bool avx2_available() {
#if defined(__x86_64__) || defined(_M_X64)
  return static_cast<bool>(__builtin_cpu_supports("avx2"));
#else
  return false;
#endif
}

const char* backend() { return use_avx2() ? "avx2" : "scalar"; }

double dot(const double* a, const double* b, std::size_t n) {
#if defined(__x86_64__) || defined(_M_X64)
  if (use_avx2()) return dot_avx2(a, b, n);
#endif
  return dot_scalar(a, b, n);
}

std::complex<double> dot_cr(const std::complex<double>* x, const double* taps,
                            std::size_t n) {
#if defined(__x86_64__) || defined(_M_X64)
  if (use_avx2()) return dot_cr_avx2(x, taps, n);
#endif
  return dot_cr_scalar(x, taps, n);
}

double energy(const std::complex<double>* x, std::size_t n) {
#if defined(__x86_64__) || defined(_M_X64)
  if (use_avx2()) return energy_avx2(x, n);
#endif
  return energy_scalar(x, n);
}

}  // namespace psdm::kernels
