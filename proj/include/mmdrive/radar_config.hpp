#pragma once

#include <limits>

namespace mmdrive {

inline constexpr double kSpeedOfLight = 299792458.0;

/// Physical and sampling parameters of the FMCW radar.
///
/// The defaults reproduce the in-cabin configuration: 60 GHz start
/// frequency, 3.75 cm range bins, 64 range bins, 16 doppler bins,
/// 64 chirps per frame at 5 frames/s and a 1 m/s unambiguous velocity.
/// The chirp time is chosen so that the decimated slow-time axis
/// (every `chirps_per_frame / doppler_bins`-th chirp) spans exactly
/// +/- `max_velocity()`.
struct RadarConfig {
  double start_frequency = 60.0e9;                   // Hz
  double bandwidth = kSpeedOfLight / (2.0 * 0.0375);  // Hz
  double chirp_time = kSpeedOfLight / 60.0e9 / 16.0;  // s, chirp repetition interval
  int chirps_per_frame = 64;
  int samples_per_chirp = 256;
  int frames_per_second = 5;
  int range_bins = 64;
  int doppler_bins = 16;
  /// Per-sample SNR of a unit-reflectivity return; +inf disables noise.
  double snr_db = 20.0;
  /// Amplitude of a unit-reflectivity return in ADC units.
  double adc_gain = 100.0;

  double wavelength() const { return kSpeedOfLight / start_frequency; }
  double range_resolution() const { return kSpeedOfLight / (2.0 * bandwidth); }
  double max_range() const { return range_bins * range_resolution(); }
  /// Chirp slope S = B / T_C in Hz/s.
  double slope() const { return bandwidth / chirp_time; }
  double sample_rate() const { return samples_per_chirp / chirp_time; }
  /// Chirp stride used by the doppler FFT.
  int doppler_decimation() const { return chirps_per_frame / doppler_bins; }
  double max_velocity() const {
    return wavelength() / (4.0 * doppler_decimation() * chirp_time);
  }
  double velocity_resolution() const { return 2.0 * max_velocity() / doppler_bins; }
  double frame_period() const { return 1.0 / frames_per_second; }
  bool noiseless() const { return snr_db == std::numeric_limits<double>::infinity(); }

  /// Throws InvalidArgument when the configuration cannot be processed
  /// (non power-of-two FFT sizes, too many range bins, ...).
  void validate() const;
};

}  // namespace mmdrive
