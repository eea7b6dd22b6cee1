#pragma once

#include <cstddef>
#include <vector>

namespace mmdrive {

/// One vertical-acceleration reading from the vehicle IMU.
struct ImuSample {
  double timestamp = 0.0;  // s
  double accel_z = 0.0;    // m/s^2, includes gravity
};

/// Closed time interval [start, end] in seconds.
struct Interval {
  double start = 0.0;
  double end = 0.0;

  bool contains(double t) const { return t >= start && t <= end; }
};

/// Per-frame radar features in dB. `range_doppler` is row-major
/// [doppler][range], zero doppler at row `doppler_bins / 2`.
struct RadarFrame {
  std::vector<double> range_profile;
  std::vector<double> noise_profile;
  std::vector<double> range_doppler;
  double timestamp = 0.0;
  std::size_t frame_index = 0;

  std::size_t range_bins() const { return range_profile.size(); }
  std::size_t doppler_bins() const {
    return range_profile.empty() ? 0 : range_doppler.size() / range_profile.size();
  }
};

inline constexpr std::size_t kRangeBins = 64;
inline constexpr std::size_t kDopplerBins = 16;

}  // namespace mmdrive
