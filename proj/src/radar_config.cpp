#include "mmdrive/radar_config.hpp"

#include <cmath>
#include <string>

#include "mmdrive/error.hpp"

namespace mmdrive {
namespace {

bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

}  // namespace

void RadarConfig::validate() const {
  if (!(start_frequency > 0.0) || !(bandwidth > 0.0) || !(chirp_time > 0.0)) {
    throw InvalidArgument("RadarConfig: frequencies and chirp time must be positive");
  }
  if (!is_pow2(samples_per_chirp)) {
    throw InvalidArgument("RadarConfig: samples_per_chirp must be a power of two, got " +
                          std::to_string(samples_per_chirp));
  }
  if (!is_pow2(doppler_bins)) {
    throw InvalidArgument("RadarConfig: doppler_bins must be a power of two, got " +
                          std::to_string(doppler_bins));
  }
  if (range_bins <= 0 || range_bins > samples_per_chirp) {
    throw InvalidArgument("RadarConfig: range_bins must lie in [1, samples_per_chirp]");
  }
  if (chirps_per_frame <= 0 || chirps_per_frame % doppler_bins != 0) {
    throw InvalidArgument("RadarConfig: chirps_per_frame must be a multiple of doppler_bins");
  }
  if (frames_per_second <= 0) {
    throw InvalidArgument("RadarConfig: frames_per_second must be positive");
  }
  if (chirps_per_frame * chirp_time > frame_period()) {
    throw InvalidArgument("RadarConfig: chirp burst longer than the frame period");
  }
  if (std::isnan(snr_db) || !(adc_gain > 0.0)) {
    throw InvalidArgument("RadarConfig: snr_db must be a number and adc_gain positive");
  }
}

}  // namespace mmdrive
