#include <sstream>

#include "doctest.h"
#include "mmdrive/dataset_io.hpp"
#include "mmdrive/error.hpp"

using namespace mmdrive;

namespace {

DatasetRecord sample_record(double t, std::optional<Activity> label) {
  DatasetRecord r;
  r.timestamp = t;
  r.range_profile.assign(64, 0.0);
  r.noise_profile.assign(64, 0.0);
  r.range_doppler.assign(1024, 0.0);
  for (std::size_t i = 0; i < 64; ++i) {
    r.range_profile[i] = 40.0 + 0.1 * static_cast<double>(i) + t;
    r.noise_profile[i] = 30.0 + 0.3 * static_cast<double>(i);
  }
  for (std::size_t i = 0; i < 1024; ++i) r.range_doppler[i] = 1.0 / (1.0 + static_cast<double>(i));
  r.imu_z = 9.81 + t;
  r.label = label;
  return r;
}

}  // namespace

TEST_SUITE("jsonl") {

TEST_CASE("records round trip exactly") {
  std::vector<DatasetRecord> in = {sample_record(0.0, Activity::Nodding), sample_record(0.2, std::nullopt)};
  in[1].user = "driver-3";
  std::stringstream ss;
  write_jsonl(ss, in);
  const auto out = read_jsonl(ss);
  REQUIRE(out.records.size() == 2);
  CHECK(out.errors.empty());
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(out.records[i].timestamp == in[i].timestamp);
    CHECK(out.records[i].range_profile == in[i].range_profile);
    CHECK(out.records[i].noise_profile == in[i].noise_profile);
    CHECK(out.records[i].range_doppler == in[i].range_doppler);
    CHECK(out.records[i].imu_z == in[i].imu_z);
    CHECK(out.records[i].label == in[i].label);
    CHECK(out.records[i].user == in[i].user);
  }
}

TEST_CASE("field order on disk") {
  const std::string line = record_to_json(sample_record(1.0, Activity::Yawning));
  const auto pos = [&](const char* key) { return line.find(std::string("\"") + key + "\""); };
  CHECK(pos("timestamp") < pos("range_profile"));
  CHECK(pos("range_profile") < pos("noise_profile"));
  CHECK(pos("noise_profile") < pos("range_doppler"));
  CHECK(pos("range_doppler") < pos("imu_z"));
  CHECK(pos("imu_z") < pos("label"));
  CHECK(line.find("\"Yawning\"") != std::string::npos);
}

TEST_CASE("schema errors name the field") {
  auto r = sample_record(0.0, Activity::Normal);
  r.range_profile.pop_back();
  std::string bad = record_to_json(sample_record(0.0, Activity::Normal));
  // Drop one number from range_profile.
  const auto start = bad.find("\"range_profile\":[") + 17;
  const auto comma = bad.find(',', start);
  bad.erase(start, comma - start + 1);
  try {
    (void)record_from_json(bad);
    FAIL("expected a schema error");
  } catch (const JsonlError& e) {
    CHECK(std::string(e.what()).find("range_profile") != std::string::npos);
    CHECK(std::string(e.what()).find("63") != std::string::npos);
  }
  CHECK_THROWS_AS(record_from_json("{not json"), JsonlError);
  std::string bad_label = record_to_json(sample_record(0.0, Activity::Normal));
  bad_label.replace(bad_label.find("\"Normal\""), 8, "\"Flying\"");
  try {
    (void)record_from_json(bad_label);
    FAIL("expected a label error");
  } catch (const JsonlError& e) {
    CHECK(std::string(e.what()).find("label") != std::string::npos);
  }
}

TEST_CASE("strict mode reports the line number, lenient mode collects errors") {
  std::stringstream ss;
  ss << record_to_json(sample_record(0.0, Activity::Normal)) << "\n\n{\"timestamp\": 1}\n"
     << record_to_json(sample_record(0.4, Activity::Normal)) << "\n";
  const std::string text = ss.str();
  {
    std::istringstream in(text);
    try {
      (void)read_jsonl(in);
      FAIL("expected an error");
    } catch (const JsonlError& e) {
      CHECK(e.line() == 3);
    }
  }
  std::istringstream in(text);
  const auto res = read_jsonl(in, JsonlMode::Lenient);
  CHECK(res.records.size() == 2);
  REQUIRE(res.errors.size() == 1);
  CHECK(res.errors[0].line() == 3);
}

TEST_CASE("imu csv sidecar") {
  const std::vector<ImuSample> imu = {{0.0, 9.81}, {0.02, 9.79}, {0.04, 1.0 / 3.0}};
  std::stringstream ss;
  write_imu_csv(ss, imu);
  CHECK(ss.str().rfind("timestamp,accel_z\n", 0) == 0);
  const auto back = read_imu_csv(ss);
  REQUIRE(back.size() == 3);
  CHECK(back[2].accel_z == imu[2].accel_z);
  std::istringstream unordered("timestamp,accel_z\n0.1,9\n0.05,9\n");
  CHECK_THROWS(read_imu_csv(unordered));
}

TEST_CASE("record to frame conversion") {
  const auto r = sample_record(2.0, Activity::Drinking);
  const RadarFrame f = r.to_frame(10);
  CHECK(f.frame_index == 10);
  CHECK(f.timestamp == 2.0);
  const auto back = DatasetRecord::from_frame(f, r.imu_z, r.label);
  CHECK(back.range_doppler == r.range_doppler);
}

}
