#pragma once

#include <complex>
#include <cstdint>
#include <vector>

#include "mmdrive/activity.hpp"
#include "mmdrive/radar_config.hpp"
#include "mmdrive/types.hpp"

namespace mmdrive {

/// A displacement term added to a reflector's rest distance.
struct Motion {
  enum class Kind {
    Sinusoid,   // amplitude * sin(2 pi f t + phase), always active
    Excursion,  // raised-cosine out-and-back of `amplitude` over [start, start + duration]
    Ramp,       // constant velocity `amplitude` (m/s) during [start, start + duration], then hold
    Burst,      // Hann-windowed oscillation of `amplitude` at `frequency` over the interval
  };

  Kind kind = Kind::Sinusoid;
  double start = 0.0;
  double duration = 0.0;
  double amplitude = 0.0;
  double frequency = 0.0;
  double phase = 0.0;

  double displacement(double t) const;
  double velocity(double t) const;

  static Motion sinusoid(double amplitude, double frequency, double phase);
  static Motion excursion(double start, double duration, double amplitude);
  static Motion ramp(double start, double duration, double velocity);
  static Motion burst(double start, double duration, double amplitude, double frequency);
};

/// Point reflector with a rest distance and a sum of motions.
struct Reflector {
  double rest_distance = 0.7;  // m
  double reflectivity = 1.0;
  std::vector<Motion> motions;

  double distance(double t, const std::vector<Motion>& shared = {}) const;
  double velocity(double t, const std::vector<Motion>& shared = {}) const;
};

/// Time-parameterized reflector set for one activity. `shared_motions`
/// apply to every reflector (road-bump transients).
struct Scene {
  Activity activity = Activity::Normal;
  std::vector<Reflector> reflectors;  // reflectors[0] is the torso
  std::vector<Motion> shared_motions;
  double duration = 0.0;
  std::uint64_t seed = 0;

  double distance(std::size_t reflector, double t) const {
    return reflectors.at(reflector).distance(t, shared_motions);
  }
  double velocity(std::size_t reflector, double t) const {
    return reflectors.at(reflector).velocity(t, shared_motions);
  }
};

/// Complex IF samples of one frame, row-major [chirp][sample].
struct RawCube {
  int chirps = 0;
  int samples = 0;
  std::size_t frame_index = 0;
  std::vector<std::complex<double>> data;

  RawCube() = default;
  RawCube(int chirps_, int samples_, std::size_t index = 0)
      : chirps(chirps_), samples(samples_), frame_index(index),
        data(static_cast<std::size_t>(chirps_) * samples_) {}

  std::complex<double>& at(int chirp, int sample) {
    return data[static_cast<std::size_t>(chirp) * samples + sample];
  }
  const std::complex<double>& at(int chirp, int sample) const {
    return data[static_cast<std::size_t>(chirp) * samples + sample];
  }
};

/// Builds the reflector set for `activity`; reproducible from (activity, seed).
Scene make_scene(Activity activity, double duration, std::uint64_t seed,
                 const RadarConfig& config = {});

/// IF samples for frame `frame_index` of `scene` (frame time = index / fps).
RawCube synthesize_frame(const Scene& scene, const RadarConfig& config,
                         std::size_t frame_index);

/// IF samples for a frame starting at `local_time` seconds into the scene.
/// `noise_key` selects the noise realisation.
RawCube synthesize_at(const Scene& scene, const RadarConfig& config, double local_time,
                      std::uint64_t noise_key, std::size_t frame_index = 0);

struct ScriptSegment {
  Activity activity = Activity::Normal;
  double start = 0.0;
  double duration = 0.0;
};

struct ImuOptions {
  double rate_hz = 50.0;
  double gravity = 9.81;
  double noise_sigma = 0.05;
  double undulation_amplitude = 0.2;
  double undulation_frequency = 0.25;
  double bump_peak = 6.0;  // m/s^2 above gravity
};

inline constexpr double kBumpDuration = 0.4;     // s, radar and IMU transient length
inline constexpr double kBumpDisplacement = 0.015;  // m
inline constexpr double kBumpFrequency = 6.0;    // Hz

/// A scripted drive. Frames are rendered on demand; gaps between script
/// segments are filled with Normal driving.
class DriveSimulator {
 public:
  DriveSimulator(std::vector<ScriptSegment> script, RadarConfig config, std::uint64_t seed,
                 std::vector<double> bump_times = {}, ImuOptions imu = {});

  std::size_t frame_count() const { return frame_count_; }
  double frame_time(std::size_t i) const;
  Activity label(std::size_t i) const;
  /// Index of the script (or filler) segment that frame `i` belongs to.
  int segment(std::size_t i) const;
  RawCube cube(std::size_t i) const;
  const std::vector<ImuSample>& imu() const { return imu_; }
  const std::vector<double>& bump_times() const { return bump_times_; }
  const RadarConfig& config() const { return config_; }

 private:
  struct Piece {
    double start;
    Scene scene;
  };
  std::size_t piece_for_frame(std::size_t i) const;

  RadarConfig config_;
  std::uint64_t seed_;
  std::vector<double> bump_times_;
  std::vector<Piece> pieces_;
  std::size_t frame_count_ = 0;
  std::vector<ImuSample> imu_;
};

struct Drive {
  std::vector<RawCube> cubes;
  std::vector<double> frame_times;
  std::vector<ImuSample> imu;
  std::vector<Activity> labels;
};

/// Materialises every frame of a scripted drive. Intended for short drives;
/// use DriveSimulator to stream long ones.
Drive simulate_drive(const std::vector<ScriptSegment>& script, const RadarConfig& config,
                     std::uint64_t seed, const std::vector<double>& bump_times = {});

/// Deterministic 64-bit mixing used to derive child seeds.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

}  // namespace mmdrive
