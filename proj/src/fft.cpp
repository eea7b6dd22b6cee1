#include "mmdrive/fft.hpp"

#include <cmath>
#include <numbers>
#include <utility>

#include "mmdrive/error.hpp"

namespace mmdrive {

void fft_inplace(std::span<std::complex<double>> data, bool inverse) {
  const std::size_t n = data.size();
  if (n == 0 || (n & (n - 1)) != 0) {
    throw InvalidArgument("fft_inplace: length must be a power of two");
  }
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(data[i], data[j]);
  }
  const double sign = inverse ? 1.0 : -1.0;
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t half = len / 2;
    for (std::size_t k = 0; k < half; ++k) {
      // Twiddles computed directly rather than by recurrence to keep
      // round-off independent of the transform length.
      const std::complex<double> w =
          std::polar(1.0, sign * 2.0 * std::numbers::pi * static_cast<double>(k) / len);
      for (std::size_t i = k; i < n; i += len) {
        const std::complex<double> u = data[i];
        const std::complex<double> v = data[i + half] * w;
        data[i] = u + v;
        data[i + half] = u - v;
      }
    }
  }
}

}  // namespace mmdrive
