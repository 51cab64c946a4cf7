#pragma once

#include <complex>
#include <span>
#include <vector>

namespace capcritic {

bool is_power_of_two(std::size_t n);

// In-place iterative radix-2 FFT. Length must be a power of two. The inverse
// transform includes the 1/N factor.
void fft_inplace(std::span<std::complex<double>> data, bool inverse);

// out[k] = sum_j a[j] * b[(k - j) mod D], evaluated in the frequency domain.
std::vector<double> circular_convolve(std::span<const double> a, std::span<const double> b);

// out[j] = sum_k g[k] * b[(k - j) mod D]; the adjoint of convolution by b.
std::vector<double> circular_correlate(std::span<const double> g, std::span<const double> b);

}  // namespace capcritic
