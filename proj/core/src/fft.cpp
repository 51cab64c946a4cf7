#include "capcritic/fft.hpp"

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "capcritic/error.hpp"

namespace capcritic {

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

void fft_inplace(std::span<std::complex<double>> data, bool inverse) {
  const std::size_t n = data.size();
  if (!is_power_of_two(n)) {
    throw ShapeError("fft length " + std::to_string(n) + " is not a power of two");
  }
  // bit-reversal permutation
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(data[i], data[j]);
  }
  const double sign = inverse ? 1.0 : -1.0;
  // twiddles for the full length, computed directly to avoid recurrence drift
  std::vector<std::complex<double>> twiddle(n / 2);
  for (std::size_t k = 0; k < n / 2; ++k) {
    const double angle = sign * 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
    twiddle[k] = {std::cos(angle), std::sin(angle)};
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t half = len / 2;
    const std::size_t stride = n / len;
    for (std::size_t start = 0; start < n; start += len) {
      for (std::size_t k = 0; k < half; ++k) {
        const auto u = data[start + k];
        const auto v = data[start + k + half] * twiddle[k * stride];
        data[start + k] = u + v;
        data[start + k + half] = u - v;
      }
    }
  }
  if (inverse) {
    const double scale = 1.0 / static_cast<double>(n);
    for (auto& x : data) x *= scale;
  }
}

namespace {

// Separate transforms rather than packing both signals into one complex FFT:
// the packed form leaks rounding noise from one operand into the other, so a
// zero operand would not give an exactly zero product.
std::vector<double> spectral_product(std::span<const double> a, std::span<const double> b,
                                     bool conjugate_b, const char* op) {
  if (a.size() != b.size()) {
    throw ShapeError(std::string(op) + ": length mismatch " + std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()));
  }
  const std::size_t n = a.size();
  if (!is_power_of_two(n)) {
    throw ShapeError(std::string(op) + ": length " + std::to_string(n) + " is not a power of two");
  }
  std::vector<std::complex<double>> fa(a.begin(), a.end()), fb(b.begin(), b.end());
  fft_inplace(fa, false);
  fft_inplace(fb, false);
  std::vector<std::complex<double>> prod(n);
  for (std::size_t k = 0; k < n; ++k) prod[k] = fa[k] * (conjugate_b ? std::conj(fb[k]) : fb[k]);
  fft_inplace(prod, true);
  std::vector<double> out(n);
  // imaginary residue is rounding noise for real inputs and is discarded
  for (std::size_t i = 0; i < n; ++i) out[i] = prod[i].real();
  return out;
}

}  // namespace

std::vector<double> circular_convolve(std::span<const double> a, std::span<const double> b) {
  return spectral_product(a, b, false, "circular_convolve");
}

std::vector<double> circular_correlate(std::span<const double> g, std::span<const double> b) {
  return spectral_product(g, b, true, "circular_correlate");
}

}  // namespace capcritic
