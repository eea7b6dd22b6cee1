#pragma once

#include <complex>
#include <span>

namespace mmdrive {

/// In-place iterative radix-2 FFT, X_k = sum_n x_n exp(-2 pi i k n / N).
/// `inverse` uses the positive exponent and no 1/N scaling.
/// Throws InvalidArgument unless the length is a power of two.
void fft_inplace(std::span<std::complex<double>> data, bool inverse = false);

}  // namespace mmdrive
