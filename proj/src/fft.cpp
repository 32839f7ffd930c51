#include "phonation/fft.hpp"

#include <cmath>

#include "phonation/errors.hpp"

namespace phonation {

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

std::size_t next_power_of_two(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

void fft_inplace(std::vector<std::complex<double>>& buf, bool inverse) {
  const std::size_t n = buf.size();
  if (!is_power_of_two(n)) throw ValueError("fft: size must be a power of two");
  if (n < 2) return;

  // Bit-reversal permutation.
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(buf[i], buf[j]);
  }

  const double sign = inverse ? 1.0 : -1.0;
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double angle = sign * 2.0 * M_PI / static_cast<double>(len);
    const std::complex<double> wlen(std::cos(angle), std::sin(angle));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        const std::complex<double> u = buf[i + k];
        const std::complex<double> v = buf[i + k + len / 2] * w;
        buf[i + k] = u + v;
        buf[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
  if (inverse) {
    for (auto& x : buf) x /= static_cast<double>(n);
  }
}

std::vector<double> real_fft_magnitude(const std::vector<double>& signal) {
  const std::size_t n = next_power_of_two(std::max<std::size_t>(signal.size(), 2));
  std::vector<std::complex<double>> buf(n, {0.0, 0.0});
  for (std::size_t i = 0; i < signal.size(); ++i) buf[i] = {signal[i], 0.0};
  fft_inplace(buf);
  std::vector<double> mag(n / 2 + 1);
  for (std::size_t i = 0; i <= n / 2; ++i) mag[i] = std::abs(buf[i]);
  return mag;
}

}  // namespace phonation
