#pragma once

#include <complex>
#include <span>

namespace gse::fft {

// Thin wrappers over FFTW. Plans are cached per length behind a mutex; the
// transforms themselves may be called concurrently.

/// Forward real DFT: in has n samples, out receives n/2+1 bins (unnormalised).
void rfft(std::span<const double> in, std::span<std::complex<double>> out);

/// Inverse real DFT: in has n/2+1 bins, out receives n samples, scaled by 1/n.
void irfft(std::span<const std::complex<double>> in, std::span<double> out);

/// Full complex DFT of arbitrary length (sign = -1 forward, +1 backward, unnormalised).
void cfft(std::span<const std::complex<double>> in, std::span<std::complex<double>> out, int sign);

}  // namespace gse::fft
