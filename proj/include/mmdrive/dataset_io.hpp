#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mmdrive/activity.hpp"
#include "mmdrive/types.hpp"

namespace mmdrive {

/// One radar frame of a recorded or synthesized drive. `range_doppler` is
/// flattened row-major [doppler][range] in memory and nested 16x64 on disk.
struct DatasetRecord {
  double timestamp = 0.0;
  std::vector<double> range_profile;
  std::vector<double> noise_profile;
  std::vector<double> range_doppler;
  double imu_z = 0.0;
  std::optional<Activity> label;
  std::optional<std::string> user;

  RadarFrame to_frame(std::size_t frame_index = 0) const;
  static DatasetRecord from_frame(const RadarFrame& frame, double imu_z,
                                  std::optional<Activity> label,
                                  std::optional<std::string> user = std::nullopt);
};

/// Malformed dataset line; `line()` is 1-based.
class JsonlError : public std::runtime_error {
 public:
  JsonlError(std::size_t line, const std::string& message);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

enum class JsonlMode { Strict, Lenient };

struct JsonlReadResult {
  std::vector<DatasetRecord> records;
  std::vector<JsonlError> errors;  // populated in lenient mode only
};

std::string record_to_json(const DatasetRecord& record);
/// Throws JsonlError (line 0) naming the offending field.
DatasetRecord record_from_json(const std::string& line);

void write_jsonl(std::ostream& out, std::span<const DatasetRecord> records);
JsonlReadResult read_jsonl(std::istream& in, JsonlMode mode = JsonlMode::Strict);

/// IMU sidecar: header `timestamp,accel_z`, one sample per line.
void write_imu_csv(std::ostream& out, std::span<const ImuSample> samples);
std::vector<ImuSample> read_imu_csv(std::istream& in);

}  // namespace mmdrive
