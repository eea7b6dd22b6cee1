#include "mmdrive/radar_sim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "mmdrive/error.hpp"

namespace mmdrive {
namespace {

constexpr double kPi = std::numbers::pi;

// Reflector slots shared by all templates.
constexpr std::size_t kHead = 1;
constexpr std::size_t kRightHand = 3;

class SceneRng {
 public:
  explicit SceneRng(std::uint64_t seed) : engine_(seed) {}

  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }
  // Multiplicative jitter around 1.
  double jitter(double spread) { return uniform(1.0 - spread, 1.0 + spread); }

 private:
  std::mt19937_64 engine_;
};

// Parameters of an out-and-back movement repeated through the scene.
struct EpisodeTemplate {
  double duration;  // s, one out-and-back
  double period;    // s, start-to-start spacing
  // Peak displacement per reflector slot (torso, head, left hand, right hand), m.
  double amplitude[4];
};

// Activity kinematics. Positive amplitudes move away from the dashboard.
// The same numbers are tabulated in docs/activities.md.
EpisodeTemplate episode_template(Activity a) {
  switch (a) {
    case Activity::Drinking:        return {1.6, 2.0, {0.00, 0.03, 0.00, 0.08}};
    case Activity::FetchingForward: return {1.3, 2.0, {-0.15, -0.20, 0.00, -0.25}};
    case Activity::Nodding:         return {0.6, 1.0, {-0.01, -0.06, 0.00, 0.00}};
    case Activity::Yawning:         return {1.8, 2.0, {0.00, 0.04, 0.00, 0.00}};
    case Activity::PickingDrops:    return {1.6, 2.0, {0.25, 0.35, 0.00, 0.40}};
    case Activity::TurningBack:     return {1.75, 2.0, {0.10, 0.18, 0.10, 0.00}};
    default:                        return {0.0, 0.0, {0.0, 0.0, 0.0, 0.0}};
  }
}

void add_episodes(Scene& scene, SceneRng& rng, const EpisodeTemplate& tpl) {
  if (tpl.duration <= 0.0) return;
  double amp_scale[4];
  for (double& s : amp_scale) s = rng.jitter(0.2);
  double start = rng.uniform(0.05, 0.3);
  while (start < scene.duration) {
    const double duration = tpl.duration * rng.jitter(0.1);
    for (std::size_t slot = 0; slot < 4; ++slot) {
      if (tpl.amplitude[slot] == 0.0) continue;
      scene.reflectors[slot].motions.push_back(
          Motion::excursion(start, duration, tpl.amplitude[slot] * amp_scale[slot]));
    }
    start += std::max(duration + 0.05, tpl.period * rng.jitter(0.05));
  }
}

void add_body(Scene& scene, SceneRng& rng) {
  const double torso = rng.uniform(0.62, 0.78);
  const double two_pi = 2.0 * kPi;

  Reflector t{torso, 1.0, {}};
  t.motions.push_back(Motion::sinusoid(rng.uniform(1.5e-3, 2.5e-3), rng.uniform(0.2, 0.33),
                                       rng.uniform(0.0, two_pi)));
  Reflector h{torso + rng.uniform(0.03, 0.06), 0.5, {}};
  h.motions.push_back(
      Motion::sinusoid(rng.uniform(2e-3, 5e-3), rng.uniform(0.1, 0.2), rng.uniform(0.0, two_pi)));
  Reflector lh{rng.uniform(0.40, 0.44), 1.0, {}};
  lh.motions.push_back(
      Motion::sinusoid(rng.uniform(2e-3, 5e-3), rng.uniform(0.1, 0.15), rng.uniform(0.0, two_pi)));
  Reflector rh{rng.uniform(0.46, 0.50), 1.0, {}};
  rh.motions.push_back(Motion::sinusoid(rng.uniform(0.5e-3, 1e-3), rng.uniform(0.5, 1.0),
                                        rng.uniform(0.0, two_pi)));
  scene.reflectors = {t, h, lh, rh};
}

}  // namespace

// --- Motion -----------------------------------------------------------------

Motion Motion::sinusoid(double amplitude, double frequency, double phase) {
  return {Kind::Sinusoid, 0.0, 0.0, amplitude, frequency, phase};
}
Motion Motion::excursion(double start, double duration, double amplitude) {
  return {Kind::Excursion, start, duration, amplitude, 0.0, 0.0};
}
Motion Motion::ramp(double start, double duration, double velocity) {
  return {Kind::Ramp, start, duration, velocity, 0.0, 0.0};
}
Motion Motion::burst(double start, double duration, double amplitude, double frequency) {
  return {Kind::Burst, start, duration, amplitude, frequency, 0.0};
}

double Motion::displacement(double t) const {
  switch (kind) {
    case Kind::Sinusoid:
      return amplitude * std::sin(2.0 * kPi * frequency * t + phase);
    case Kind::Excursion: {
      if (t <= start || t >= start + duration) return 0.0;
      return 0.5 * amplitude * (1.0 - std::cos(2.0 * kPi * (t - start) / duration));
    }
    case Kind::Ramp:
      return amplitude * std::clamp(t - start, 0.0, duration);
    case Kind::Burst: {
      if (t <= start || t >= start + duration) return 0.0;
      const double tau = t - start;
      const double envelope = 0.5 * (1.0 - std::cos(2.0 * kPi * tau / duration));
      return amplitude * envelope * std::sin(2.0 * kPi * frequency * tau);
    }
  }
  return 0.0;
}

double Motion::velocity(double t) const {
  switch (kind) {
    case Kind::Sinusoid: {
      const double w = 2.0 * kPi * frequency;
      return amplitude * w * std::cos(w * t + phase);
    }
    case Kind::Excursion: {
      if (t <= start || t >= start + duration) return 0.0;
      return amplitude * kPi / duration * std::sin(2.0 * kPi * (t - start) / duration);
    }
    case Kind::Ramp:
      return (t >= start && t < start + duration) ? amplitude : 0.0;
    case Kind::Burst: {
      if (t <= start || t >= start + duration) return 0.0;
      const double tau = t - start;
      const double w = 2.0 * kPi * frequency;
      const double envelope = 0.5 * (1.0 - std::cos(2.0 * kPi * tau / duration));
      const double d_envelope = kPi / duration * std::sin(2.0 * kPi * tau / duration);
      return amplitude * (d_envelope * std::sin(w * tau) + envelope * w * std::cos(w * tau));
    }
  }
  return 0.0;
}

double Reflector::distance(double t, const std::vector<Motion>& shared) const {
  double d = rest_distance;
  for (const Motion& m : motions) d += m.displacement(t);
  for (const Motion& m : shared) d += m.displacement(t);
  return d;
}

double Reflector::velocity(double t, const std::vector<Motion>& shared) const {
  double v = 0.0;
  for (const Motion& m : motions) v += m.velocity(t);
  for (const Motion& m : shared) v += m.velocity(t);
  return v;
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  // splitmix64 finaliser over a combination of both inputs.
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// --- Scenes -------------------------------------------------------------------

Scene make_scene(Activity activity, double duration, std::uint64_t seed,
                 const RadarConfig& config) {
  if (!is_valid(activity)) {
    throw InvalidArgument("make_scene: unknown activity code " +
                          std::to_string(static_cast<int>(activity)));
  }
  if (!(duration > 0.0)) {
    throw InvalidArgument("make_scene: duration must be positive");
  }
  (void)config;

  Scene scene;
  scene.activity = activity;
  scene.duration = duration;
  scene.seed = seed;

  SceneRng rng(mix_seed(seed, static_cast<std::uint64_t>(activity)));
  add_body(scene, rng);

  const double two_pi = 2.0 * kPi;
  switch (activity) {
    case Activity::Normal:
      break;
    case Activity::SteeringAnomaly: {
      // Extra hand on the rim with abrupt corrective jerks.
      Reflector hand{rng.uniform(0.44, 0.47), 0.8, {}};
      const double speed = 0.5 * rng.jitter(0.15);
      double start = rng.uniform(0.05, 0.3);
      while (start < duration) {
        const double push = 0.12 * rng.jitter(0.2);
        const double hold = 0.3 * rng.jitter(0.2);
        hand.motions.push_back(Motion::ramp(start, push, speed));
        hand.motions.push_back(Motion::ramp(start + push + hold, push, -speed));
        start += 1.0 * rng.jitter(0.1);
      }
      scene.reflectors.push_back(std::move(hand));
      break;
    }
    case Activity::UsingPhone: {
      scene.reflectors[kHead].rest_distance += 0.03 * rng.jitter(0.2);
      scene.reflectors[kRightHand].motions.push_back(Motion::sinusoid(
          4e-3 * rng.jitter(0.2), 2.5 * rng.jitter(0.1), rng.uniform(0.0, two_pi)));
      break;
    }
    case Activity::TalkingLeft: {
      auto& head = scene.reflectors[kHead].motions;
      head.push_back(Motion::sinusoid(0.012 * rng.jitter(0.2), 0.6 * rng.jitter(0.1),
                                      rng.uniform(0.0, two_pi)));
      head.push_back(Motion::sinusoid(3e-3 * rng.jitter(0.2), 3.0 * rng.jitter(0.1),
                                      rng.uniform(0.0, two_pi)));
      break;
    }
    default:
      add_episodes(scene, rng, episode_template(activity));
      break;
  }
  return scene;
}

// --- IF synthesis ---------------------------------------------------------------

RawCube synthesize_at(const Scene& scene, const RadarConfig& config, double local_time,
                      std::uint64_t noise_key, std::size_t frame_index) {
  const int chirps = config.chirps_per_frame;
  const int samples = config.samples_per_chirp;
  RawCube cube(chirps, samples, frame_index);

  const double lambda = config.wavelength();
  const double range_res = config.range_resolution();
  for (const Reflector& r : scene.reflectors) {
    const double amp = r.reflectivity * config.adc_gain;
    for (int c = 0; c < chirps; ++c) {
      // Stop-and-hop: distance frozen for the duration of one chirp.
      const double t = local_time + c * config.chirp_time;
      const double d = r.distance(t, scene.shared_motions);
      const std::complex<double> start = std::polar(amp, 4.0 * kPi * d / lambda);
      // Beat frequency expressed in cycles per sample: f_b / f_s = d / (range_res * N).
      const double cycles_per_sample = d / (range_res * samples);
      const std::complex<double> step = std::polar(1.0, 2.0 * kPi * cycles_per_sample);
      std::complex<double> phasor = start;
      std::complex<double>* row = &cube.at(c, 0);
      for (int n = 0; n < samples; ++n) {
        row[n] += phasor;
        phasor *= step;
      }
    }
  }

  if (!config.noiseless()) {
    const double sigma = config.adc_gain * std::pow(10.0, -config.snr_db / 20.0);
    std::seed_seq seq{static_cast<std::uint32_t>(scene.seed),
                      static_cast<std::uint32_t>(scene.seed >> 32),
                      static_cast<std::uint32_t>(noise_key),
                      static_cast<std::uint32_t>(noise_key >> 32), 0x6d6d5752u};
    std::mt19937_64 engine(seq);
    std::normal_distribution<double> normal(0.0, sigma / std::numbers::sqrt2);
    for (auto& x : cube.data) x += std::complex<double>(normal(engine), normal(engine));
  }
  return cube;
}

RawCube synthesize_frame(const Scene& scene, const RadarConfig& config,
                         std::size_t frame_index) {
  const double t = static_cast<double>(frame_index) / config.frames_per_second;
  if (!(t < scene.duration)) {
    throw OutOfRange("synthesize_frame: frame " + std::to_string(frame_index) +
                     " starts at " + std::to_string(t) + " s, past scene duration " +
                     std::to_string(scene.duration) + " s");
  }
  return synthesize_at(scene, config, t, frame_index, frame_index);
}

// --- Scripted drives ------------------------------------------------------------

DriveSimulator::DriveSimulator(std::vector<ScriptSegment> script, RadarConfig config,
                               std::uint64_t seed, std::vector<double> bump_times,
                               ImuOptions imu)
    : config_(config), seed_(seed), bump_times_(std::move(bump_times)) {
  config_.validate();
  for (std::size_t i = 0; i < script.size(); ++i) {
    const auto& s = script[i];
    if (!is_valid(s.activity)) throw InvalidArgument("script: unknown activity");
    if (!(s.duration > 0.0) || s.start < 0.0) {
      throw InvalidArgument("script: segment " + std::to_string(i) +
                            " needs start >= 0 and duration > 0");
    }
    if (i > 0) {
      const auto& prev = script[i - 1];
      if (s.start < prev.start + prev.duration - 1e-9) {
        throw InvalidArgument("script: segment " + std::to_string(i) +
                              " overlaps or precedes segment " + std::to_string(i - 1));
      }
    }
  }
  std::sort(bump_times_.begin(), bump_times_.end());

  // Pieces: script segments plus Normal filler for gaps.
  double cursor = 0.0;
  std::uint64_t piece_id = 0;
  auto push_piece = [&](Activity a, double start, double duration) {
    Scene scene = make_scene(a, duration, mix_seed(seed_, piece_id++), config_);
    for (double tb : bump_times_) {
      const double local = tb - start;
      if (local > -kBumpDuration && local < duration) {
        scene.shared_motions.push_back(
            Motion::burst(local, kBumpDuration, kBumpDisplacement, kBumpFrequency));
      }
    }
    pieces_.push_back({start, std::move(scene)});
  };
  for (const auto& s : script) {
    if (s.start > cursor + 1e-9) push_piece(Activity::Normal, cursor, s.start - cursor);
    push_piece(s.activity, s.start, s.duration);
    cursor = s.start + s.duration;
  }
  const double end = cursor;
  frame_count_ = static_cast<std::size_t>(std::ceil(end * config_.frames_per_second - 1e-9));
  if (end <= 0.0) frame_count_ = 0;

  // IMU: gravity, road undulation, white noise, and one spike per bump.
  if (end > 0.0) {
    std::mt19937_64 engine(mix_seed(seed_, 0x494d55ULL));
    std::normal_distribution<double> noise(0.0, imu.noise_sigma);
    const double phase = std::uniform_real_distribution<double>(0.0, 2.0 * kPi)(engine);
    const auto count = static_cast<std::size_t>(std::ceil(end * imu.rate_hz));
    imu_.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
      const double t = static_cast<double>(i) / imu.rate_hz;
      double a = imu.gravity +
                 imu.undulation_amplitude *
                     std::sin(2.0 * kPi * imu.undulation_frequency * t + phase) +
                 noise(engine);
      for (double tb : bump_times_) {
        const double tau = t - tb;
        if (tau > 0.0 && tau < kBumpDuration) {
          a += imu.bump_peak * std::sin(kPi * tau / kBumpDuration) *
               std::cos(2.0 * kPi * 5.0 * (tau - 0.2));
        }
      }
      imu_.push_back({t, a});
    }
  }
}

double DriveSimulator::frame_time(std::size_t i) const {
  return static_cast<double>(i) / config_.frames_per_second;
}

std::size_t DriveSimulator::piece_for_frame(std::size_t i) const {
  if (i >= frame_count_) {
    throw OutOfRange("DriveSimulator: frame " + std::to_string(i) + " past end of drive");
  }
  const double t = frame_time(i);
  auto it = std::upper_bound(pieces_.begin(), pieces_.end(), t,
                             [](double value, const Piece& p) { return value < p.start; });
  return static_cast<std::size_t>(std::distance(pieces_.begin(), it)) - 1;
}

Activity DriveSimulator::label(std::size_t i) const {
  return pieces_[piece_for_frame(i)].scene.activity;
}

int DriveSimulator::segment(std::size_t i) const {
  return static_cast<int>(piece_for_frame(i));
}

RawCube DriveSimulator::cube(std::size_t i) const {
  const Piece& p = pieces_[piece_for_frame(i)];
  return synthesize_at(p.scene, config_, frame_time(i) - p.start, i, i);
}

Drive simulate_drive(const std::vector<ScriptSegment>& script, const RadarConfig& config,
                     std::uint64_t seed, const std::vector<double>& bump_times) {
  DriveSimulator sim(script, config, seed, bump_times);
  Drive drive;
  drive.imu = sim.imu();
  drive.cubes.reserve(sim.frame_count());
  for (std::size_t i = 0; i < sim.frame_count(); ++i) {
    drive.cubes.push_back(sim.cube(i));
    drive.frame_times.push_back(sim.frame_time(i));
    drive.labels.push_back(sim.label(i));
  }
  return drive;
}

}  // namespace mmdrive
