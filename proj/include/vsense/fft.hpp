#pragma once

#include <complex>
#include <cstddef>
#include <span>

// Thin wrapper over FFTW. Plans are cached per (size, kind) and shared;
// execution is reentrant.
namespace vsense::dsp {

using Complex = std::complex<double>;

/// X[k] = sum_n x[n] exp(-2 pi i k n / N), unnormalized. `in` and `out` must not alias.
void fft(std::span<const Complex> in, std::span<Complex> out);

/// x[n] = (1/N) sum_k X[k] exp(+2 pi i k n / N). `in` and `out` must not alias.
void ifft(std::span<const Complex> in, std::span<Complex> out);

/// Real-input forward transform; `out` holds the N/2+1 non-negative frequency bins.
void rfft(std::span<const double> in, std::span<Complex> out);

}  // namespace vsense::dsp
