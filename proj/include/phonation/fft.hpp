#pragma once

#include <complex>
#include <vector>

namespace phonation {

// In-place iterative radix-2 FFT; size must be a power of two.
void fft_inplace(std::vector<std::complex<double>>& buf, bool inverse = false);

// Magnitudes of bins 0..n/2 of the DFT of a real signal, zero-padded to the
// next power of two if needed.
std::vector<double> real_fft_magnitude(const std::vector<double>& signal);

bool is_power_of_two(std::size_t n);
std::size_t next_power_of_two(std::size_t n);

}  // namespace phonation
