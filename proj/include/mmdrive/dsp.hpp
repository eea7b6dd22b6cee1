#pragma once

#include <complex>
#include <cstddef>
#include <vector>

#include "mmdrive/radar_config.hpp"
#include "mmdrive/radar_sim.hpp"
#include "mmdrive/types.hpp"

namespace mmdrive {

/// Dense row-major complex matrix.
struct ComplexMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<std::complex<double>> data;

  ComplexMatrix() = default;
  ComplexMatrix(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c) {}

  std::complex<double>& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  const std::complex<double>& at(int r, int c) const {
    return data[static_cast<std::size_t>(r) * cols + c];
  }
};

inline constexpr double kPowerEpsilon = 1e-12;
inline constexpr double kDbFloor = -120.0;

/// 10 log10(|x|^2 + eps), clamped at kDbFloor.
double power_db(std::complex<double> x);

struct RangeFftOptions {
  bool hann_window = true;
  /// Keep only the first `range_bins` outputs; otherwise all samples.
  bool truncate = true;
};

/// Per-chirp FFT over fast time. Result is chirps x range_bins.
ComplexMatrix range_fft(const RawCube& cube, const RadarConfig& config,
                        const RangeFftOptions& options = {});

/// Slow-time FFT over every `doppler_decimation()`-th chirp, shifted so
/// that row `doppler_bins / 2` is zero doppler. Result is doppler_bins x cols.
ComplexMatrix doppler_fft(const ComplexMatrix& range_spectra, const RadarConfig& config);

/// Row of the shifted doppler axis that holds velocity `v`.
int doppler_row_for_velocity(double v, const RadarConfig& config);
double velocity_for_doppler_row(int row, const RadarConfig& config);
/// Row carrying the maximum unambiguous velocity (noise profile source).
inline int max_velocity_row() { return 0; }

/// Range profile (zero doppler, coherent over all chirps), noise profile
/// (max-velocity doppler row) and the full range-doppler map, all in dB.
RadarFrame extract_features(const RawCube& cube, const RadarConfig& config, double timestamp);

}  // namespace mmdrive
