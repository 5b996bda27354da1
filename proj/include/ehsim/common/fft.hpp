#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace ehsim::fft {

// Forward real DFT, unnormalized: X_k = sum_n x_n exp(-2 pi i k n / N).
// Returns N/2 + 1 bins.
std::vector<std::complex<double>> forward(std::span<const double> x);

// Inverse of forward(); `n` is the time-domain length. Normalized so that
// inverse(forward(x), x.size()) == x up to rounding.
std::vector<double> inverse(std::span<const std::complex<double>> bins, std::size_t n);

// One-sided periodogram of the mean-removed signal: entry k is the share of
// the signal variance carried by bin k (bin 0 is always zero). Sums to the
// population variance of x.
std::vector<double> variance_spectrum(std::span<const double> x);

// Frequency in Hz of bin k for a length-n window sampled at `rate_hz`.
inline double bin_frequency(std::size_t k, std::size_t n, double rate_hz) {
  return static_cast<double>(k) * rate_hz / static_cast<double>(n);
}

}  // namespace ehsim::fft
