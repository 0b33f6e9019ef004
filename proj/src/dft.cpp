#include "svaclr/dft.hpp"

#include <cmath>
#include <complex>
#include <numbers>

#include "svaclr/errors.hpp"

namespace svaclr::dft {

bool is_power_of_two(std::size_t n) { return n > 0 && (n & (n - 1)) == 0; }

std::vector<double> magnitude_naive(std::span<const double> x,
                                    std::size_t first_bin, std::size_t count) {
  const std::size_t n = x.size();
  if (n == 0) throw DomainError("dft: empty signal");
  if (first_bin + count > n)
    throw DomainError("dft: requested bins exceed signal length");
  std::vector<double> mags(count);
  const double w = 2.0 * std::numbers::pi / static_cast<double>(n);
  for (std::size_t b = 0; b < count; ++b) {
    const double wk = w * static_cast<double>(first_bin + b);
    double re = 0.0, im = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double phase = wk * static_cast<double>(j);
      re += x[j] * std::cos(phase);
      im -= x[j] * std::sin(phase);
    }
    mags[b] = std::hypot(re, im);
  }
  return mags;
}

std::vector<double> magnitude_fft(std::span<const double> x,
                                  std::size_t first_bin, std::size_t count) {
  const std::size_t n = x.size();
  if (!is_power_of_two(n))
    throw DomainError("fft: length must be a power of two, got " +
                      std::to_string(n));
  if (first_bin + count > n)
    throw DomainError("fft: requested bins exceed signal length");

  std::vector<std::complex<double>> a(n);
  for (std::size_t i = 0; i < n; ++i) a[i] = x[i];

  // bit-reversal permutation
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }

  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * std::numbers::pi / static_cast<double>(len);
    const std::complex<double> wlen(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t j = 0; j < len / 2; ++j) {
        const std::complex<double> u = a[i + j];
        const std::complex<double> v = a[i + j + len / 2] * w;
        a[i + j] = u + v;
        a[i + j + len / 2] = u - v;
        w *= wlen;
      }
    }
  }

  std::vector<double> mags(count);
  for (std::size_t b = 0; b < count; ++b) mags[b] = std::abs(a[first_bin + b]);
  return mags;
}

}  // namespace svaclr::dft
