#pragma once

#include <complex>
#include <cstddef>
#include <vector>

namespace nlsid::dsp {

using cvec = std::vector<std::complex<double>>;

/// Forward DFT, any length (radix-2 with a Bluestein fallback).
cvec fft(const cvec& x);
cvec fft(const std::vector<double>& x);
/// Inverse DFT, scaled by 1/N.
cvec ifft(const cvec& x);

/// Single DFT bin k of a real signal, direct summation.
std::complex<double> dft_bin(const double* x, std::size_t n, std::size_t k);

/// Analytic signal via the one-sided spectrum (DFT-based quadrature).
cvec analytic_signal(const std::vector<double>& x);

/// Unwraps a phase sequence in place (removes 2*pi jumps).
void unwrap_phase(std::vector<double>& phase);

/// Centered moving average; the window is forced odd. Values within half a
/// window of the edges are left untouched by the caller's convention.
std::vector<double> moving_average(const std::vector<double>& x, int window);

/// Dominant frequency of a real signal in Hz: Hann-windowed periodogram peak
/// with quadratic interpolation of the log magnitude.
double dominant_frequency(const std::vector<double>& x, double sample_rate);

}  // namespace nlsid::dsp
