#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace svaclr::dft {

// |DFT| of a real signal at bins [first_bin, first_bin + count).
// magnitude_naive is the O(n^2) reference; magnitude_fft uses an iterative
// radix-2 transform and requires a power-of-two length. The two agree to
// better than 1e-9 on unit-scale signals.
std::vector<double> magnitude_naive(std::span<const double> x,
                                    std::size_t first_bin, std::size_t count);
std::vector<double> magnitude_fft(std::span<const double> x,
                                  std::size_t first_bin, std::size_t count);

bool is_power_of_two(std::size_t n);

}  // namespace svaclr::dft
