#include "mmdrive/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "mmdrive/error.hpp"
#include "mmdrive/fft.hpp"

namespace mmdrive {
namespace {

const std::vector<double>& hann(int n) {
  thread_local std::vector<double> cache;
  if (static_cast<int>(cache.size()) != n) {
    cache.resize(n);
    for (int i = 0; i < n; ++i) {
      cache[i] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * i / n));
    }
  }
  return cache;
}

}  // namespace

double power_db(std::complex<double> x) {
  const double db = 10.0 * std::log10(std::norm(x) + kPowerEpsilon);
  return std::max(db, kDbFloor);
}

ComplexMatrix range_fft(const RawCube& cube, const RadarConfig& config,
                        const RangeFftOptions& options) {
  if (cube.chirps != config.chirps_per_frame || cube.samples != config.samples_per_chirp ||
      cube.data.size() != static_cast<std::size_t>(cube.chirps) * cube.samples) {
    throw InvalidArgument("range_fft: cube shape " + std::to_string(cube.chirps) + "x" +
                          std::to_string(cube.samples) + " does not match config " +
                          std::to_string(config.chirps_per_frame) + "x" +
                          std::to_string(config.samples_per_chirp));
  }
  const int n = cube.samples;
  const int keep = options.truncate ? config.range_bins : n;
  if (keep > n) throw InvalidArgument("range_fft: more range bins than samples");

  ComplexMatrix out(cube.chirps, keep);
  std::vector<std::complex<double>> row(n);
  const std::vector<double>& w = hann(n);
  for (int c = 0; c < cube.chirps; ++c) {
    for (int s = 0; s < n; ++s) {
      row[s] = options.hann_window ? cube.at(c, s) * w[s] : cube.at(c, s);
    }
    fft_inplace(row);
    std::copy_n(row.begin(), keep, &out.at(c, 0));
  }
  return out;
}

ComplexMatrix doppler_fft(const ComplexMatrix& range_spectra, const RadarConfig& config) {
  if (range_spectra.rows != config.chirps_per_frame) {
    throw InvalidArgument("doppler_fft: expected " + std::to_string(config.chirps_per_frame) +
                          " chirp rows, got " + std::to_string(range_spectra.rows));
  }
  const int bins = config.doppler_bins;
  const int stride = config.doppler_decimation();
  const int half = bins / 2;
  ComplexMatrix out(bins, range_spectra.cols);
  std::vector<std::complex<double>> column(bins);
  for (int k = 0; k < range_spectra.cols; ++k) {
    for (int m = 0; m < bins; ++m) column[m] = range_spectra.at(m * stride, k);
    fft_inplace(column);
    for (int m = 0; m < bins; ++m) out.at((m + half) % bins, k) = column[m];
  }
  return out;
}

int doppler_row_for_velocity(double v, const RadarConfig& config) {
  return config.doppler_bins / 2 +
         static_cast<int>(std::lround(v / config.velocity_resolution()));
}

double velocity_for_doppler_row(int row, const RadarConfig& config) {
  return (row - config.doppler_bins / 2) * config.velocity_resolution();
}

RadarFrame extract_features(const RawCube& cube, const RadarConfig& config, double timestamp) {
  const ComplexMatrix spectra = range_fft(cube, config);
  const ComplexMatrix rd = doppler_fft(spectra, config);

  RadarFrame frame;
  frame.timestamp = timestamp;
  frame.frame_index = cube.frame_index;
  const int bins = spectra.cols;
  frame.range_profile.resize(bins);
  frame.noise_profile.resize(bins);
  for (int k = 0; k < bins; ++k) {
    std::complex<double> coherent{0.0, 0.0};
    for (int c = 0; c < spectra.rows; ++c) coherent += spectra.at(c, k);
    frame.range_profile[k] = power_db(coherent);
    frame.noise_profile[k] = power_db(rd.at(max_velocity_row(), k));
  }
  frame.range_doppler.resize(rd.data.size());
  std::transform(rd.data.begin(), rd.data.end(), frame.range_doppler.begin(), power_db);
  return frame;
}

}  // namespace mmdrive
