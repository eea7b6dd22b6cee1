#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "mmdrive/dsp.hpp"
#include "mmdrive/error.hpp"
#include "mmdrive/fft.hpp"
#include "mmdrive/radar_sim.hpp"
#include "../support/oracles.hpp"

using namespace mmdrive;

namespace {

Scene point_scene(double d, double v, double duration = 1.0) {
  Scene s;
  s.duration = duration;
  Reflector r;
  r.rest_distance = d;
  r.motions.push_back(Motion::ramp(0.0, duration, v));
  s.reflectors.push_back(r);
  return s;
}

RadarConfig noiseless() {
  RadarConfig c;
  c.snr_db = std::numeric_limits<double>::infinity();
  return c;
}

int argmax(const std::vector<double>& v) {
  return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace

TEST_SUITE("radar_dsp") {

TEST_CASE("configuration derived quantities") {
  const RadarConfig c;
  CHECK(c.range_resolution() == doctest::Approx(0.0375).epsilon(1e-12));
  CHECK(c.max_range() == doctest::Approx(2.4).epsilon(1e-12));
  CHECK(c.max_velocity() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(c.velocity_resolution() == doctest::Approx(0.125).epsilon(1e-12));
  CHECK(c.doppler_decimation() == 4);
  CHECK(c.frame_period() == doctest::Approx(0.2));
  CHECK_NOTHROW(c.validate());

  RadarConfig bad = c;
  bad.samples_per_chirp = 250;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
  bad = c;
  bad.range_bins = 512;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
}

TEST_CASE("fft matches the naive dft on random inputs") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n(0.0, 1.0);
  for (std::size_t len : {1u, 2u, 8u, 64u, 256u}) {
    std::vector<std::complex<double>> x(len);
    for (auto& v : x) v = {n(rng), n(rng)};
    auto y = x;
    fft_inplace(y);
    CHECK(oracle::max_rel_error(y, oracle::naive_dft(x)) < 1e-12);
    fft_inplace(y, true);
    for (std::size_t i = 0; i < len; ++i) CHECK(std::abs(y[i] / static_cast<double>(len) - x[i]) < 1e-12);
  }
  std::vector<std::complex<double>> odd(12);
  CHECK_THROWS_AS(fft_inplace(odd), InvalidArgument);
}

TEST_CASE("power in dB has a floor") {
  CHECK(power_db({0.0, 0.0}) == doctest::Approx(kDbFloor));
  CHECK(power_db({10.0, 0.0}) == doctest::Approx(20.0).epsilon(1e-9));
  CHECK(power_db({3.0, 4.0}) == doctest::Approx(10.0 * std::log10(25.0 + kPowerEpsilon)));
}

TEST_CASE("point reflector lands on its range bin and doppler row") {
  const RadarConfig c = noiseless();
  for (int bin : {6, 12, 20, 33}) {
    const double d = bin * c.range_resolution();
    const auto frame = extract_features(synthesize_frame(point_scene(d, 0.0), c, 0), c, 0.0);
    CHECK(argmax(frame.range_profile) == bin);
  }
  for (int steps : {-3, -1, 0, 2, 5}) {
    const double v = steps * c.velocity_resolution();
    const auto frame = extract_features(synthesize_frame(point_scene(0.75, v), c, 0), c, 0.0);
    std::vector<double> col(16);
    for (int r = 0; r < 16; ++r) col[static_cast<std::size_t>(r)] = frame.range_doppler[static_cast<std::size_t>(r * 64 + 20)];
    CHECK(argmax(col) == 8 + steps);
    CHECK(doppler_row_for_velocity(v, c) == 8 + steps);
    CHECK(velocity_for_doppler_row(8 + steps, c) == doctest::Approx(v));
  }
}

TEST_CASE("range fft shape and mismatch errors") {
  const RadarConfig c = noiseless();
  const RawCube cube = synthesize_frame(point_scene(0.5, 0.0), c, 0);
  const auto spec = range_fft(cube, c);
  CHECK(spec.rows == 64);
  CHECK(spec.cols == 64);
  CHECK(range_fft(cube, c, {.hann_window = false, .truncate = false}).cols == 256);
  const auto dop = doppler_fft(spec, c);
  CHECK(dop.rows == 16);
  RawCube wrong(32, 256);
  CHECK_THROWS_AS(range_fft(wrong, c), InvalidArgument);
  ComplexMatrix short_rows(10, 64);
  CHECK_THROWS_AS(doppler_fft(short_rows, c), InvalidArgument);
}

TEST_CASE("frame synthesis is deterministic and noise varies per frame") {
  const RadarConfig c;
  const Scene s = make_scene(Activity::Drinking, 4.0, 99, c);
  const RawCube a = synthesize_frame(s, c, 3);
  const RawCube b = synthesize_frame(s, c, 3);
  CHECK(a.data == b.data);
  const RawCube other = synthesize_frame(s, c, 4);
  CHECK(a.data != other.data);
  CHECK_THROWS_AS(synthesize_frame(s, c, 20), OutOfRange);
  const Scene s2 = make_scene(Activity::Drinking, 4.0, 99, c);
  CHECK(s2.reflectors.size() == s.reflectors.size());
  CHECK(s2.distance(0, 1.3) == s.distance(0, 1.3));
}

TEST_CASE("noise profile sits below the range profile for a static scene") {
  const RadarConfig c;
  const auto frame = extract_features(synthesize_frame(point_scene(0.75, 0.0), c, 0), c, 0.0);
  CHECK(frame.range_profile[20] > frame.noise_profile[20] + 20.0);
  CHECK(frame.range_profile.size() == 64);
  CHECK(frame.noise_profile.size() == 64);
  CHECK(frame.range_doppler.size() == 1024);
}

TEST_CASE("motion primitives") {
  const Motion e = Motion::excursion(1.0, 2.0, 0.1);
  CHECK(e.displacement(0.5) == 0.0);
  CHECK(e.displacement(2.0) == doctest::Approx(0.1));
  CHECK(e.displacement(3.5) == doctest::Approx(0.0).epsilon(1e-12));
  const Motion r = Motion::ramp(0.0, 1.0, 0.3);
  CHECK(r.velocity(0.5) == doctest::Approx(0.3));
  CHECK(r.displacement(2.0) == doctest::Approx(0.3));
  const Motion s = Motion::sinusoid(0.01, 2.0, 0.0);
  const double h = 1e-6;
  CHECK(s.velocity(0.3) == doctest::Approx((s.displacement(0.3 + h) - s.displacement(0.3 - h)) / (2 * h)).epsilon(1e-6));
}

TEST_CASE("every activity scene keeps the body inside the radar range") {
  const RadarConfig c;
  for (Activity a : all_activities()) {
    const Scene s = make_scene(a, 8.0, 5, c);
    REQUIRE(!s.reflectors.empty());
    for (std::size_t i = 0; i < s.reflectors.size(); ++i) {
      for (double t = 0.0; t < 8.0; t += 0.05) {
        const double d = s.distance(i, t);
        CHECK(d > 0.1);
        CHECK(d < c.max_range());
        CHECK(std::isfinite(s.velocity(i, t)));
      }
    }
  }
}

TEST_CASE("drive simulator labels, segments and gap filling") {
  const RadarConfig c;
  DriveSimulator sim({{Activity::Nodding, 0.0, 2.0}, {Activity::Yawning, 3.0, 2.0}}, c, 3);
  CHECK(sim.frame_count() == 25);
  CHECK(sim.label(0) == Activity::Nodding);
  CHECK(sim.label(12) == Activity::Normal);
  CHECK(sim.label(20) == Activity::Yawning);
  CHECK(sim.segment(0) != sim.segment(12));
  CHECK(sim.frame_time(5) == doctest::Approx(1.0));
  CHECK(sim.cube(7).data == sim.cube(7).data);
  CHECK(!sim.imu().empty());
  CHECK_THROWS_AS(DriveSimulator({{Activity::Nodding, 0.0, 2.0}, {Activity::Yawning, 1.0, 2.0}}, c, 3),
                  InvalidArgument);
}

}
