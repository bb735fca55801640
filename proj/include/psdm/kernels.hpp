#pragma once

#include <complex>
#include <cstddef>

// Data-parallel inner loops shared by the FIR filter, the frame-sync
// correlator and the despreader. Scalar reference kernels are always
// available; an AVX2 variant is selected at runtime when the CPU supports
// it. The two paths are equivalence-tested against each other.

namespace psdm::kernels {

// Sum of a[i]*b[i], i = 0..n-1.
double dot_scalar(const double* a, const double* b, std::size_t n);

// Real taps against an interleaved complex signal window.
// re = sum taps[i]*x[i].real(), im = sum taps[i]*x[i].imag().
std::complex<double> dot_cr_scalar(const std::complex<double>* x,
                                   const double* taps, std::size_t n);

// Sum of |x[i]|^2.
double energy_scalar(const std::complex<double>* x, std::size_t n);

#if defined(__x86_64__) || defined(_M_X64)
double dot_avx2(const double* a, const double* b, std::size_t n);
std::complex<double> dot_cr_avx2(const std::complex<double>* x,
                                 const double* taps, std::size_t n);
double energy_avx2(const std::complex<double>* x, std::size_t n);
#endif

// Dispatched entry points (resolved once, on first call).
double dot(const double* a, const double* b, std::size_t n);
std::complex<double> dot_cr(const std::complex<double>* x, const double* taps,
                            std::size_t n);
double energy(const std::complex<double>* x, std::size_t n);

// Name of the active backend: "scalar" or "avx2".
const char* backend();

// True when the AVX2 path is compiled in and the CPU reports support.
bool avx2_available();

}  // namespace psdm::kernels
