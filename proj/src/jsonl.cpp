#include "mmdrive/dataset_io.hpp"

#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

#include "json.hpp"
#include "mmdrive/error.hpp"

namespace mmdrive {
namespace {

using ordered_json = nlohmann::ordered_json;

std::vector<double> read_vector(const ordered_json& j, const char* field, std::size_t expected) {
  if (!j.contains(field)) throw JsonlError(0, std::string("missing field '") + field + "'");
  const ordered_json& v = j.at(field);
  if (!v.is_array() || v.size() != expected) {
    throw JsonlError(0, std::string("field '") + field + "' must be an array of " +
                            std::to_string(expected) + " numbers, got " +
                            (v.is_array() ? std::to_string(v.size()) + " elements" : "non-array"));
  }
  std::vector<double> out;
  out.reserve(expected);
  for (const auto& x : v) {
    if (!x.is_number()) throw JsonlError(0, std::string("field '") + field + "' has a non-number");
    out.push_back(x.get<double>());
  }
  return out;
}

}  // namespace

JsonlError::JsonlError(std::size_t line, const std::string& message)
    : std::runtime_error(line == 0 ? message : "line " + std::to_string(line) + ": " + message),
      line_(line) {}

RadarFrame DatasetRecord::to_frame(std::size_t frame_index) const {
  RadarFrame f;
  f.range_profile = range_profile;
  f.noise_profile = noise_profile;
  f.range_doppler = range_doppler;
  f.timestamp = timestamp;
  f.frame_index = frame_index;
  return f;
}

DatasetRecord DatasetRecord::from_frame(const RadarFrame& frame, double imu_z,
                                        std::optional<Activity> label,
                                        std::optional<std::string> user) {
  DatasetRecord r;
  r.timestamp = frame.timestamp;
  r.range_profile = frame.range_profile;
  r.noise_profile = frame.noise_profile;
  r.range_doppler = frame.range_doppler;
  r.imu_z = imu_z;
  r.label = label;
  r.user = std::move(user);
  return r;
}

std::string record_to_json(const DatasetRecord& r) {
  if (r.range_profile.size() != kRangeBins || r.noise_profile.size() != kRangeBins ||
      r.range_doppler.size() != kRangeBins * kDopplerBins) {
    throw InvalidArgument("record_to_json: record arrays must be 64 / 64 / 16x64");
  }
  ordered_json j;
  j["timestamp"] = r.timestamp;
  j["range_profile"] = r.range_profile;
  j["noise_profile"] = r.noise_profile;
  ordered_json rd = ordered_json::array();
  for (std::size_t d = 0; d < kDopplerBins; ++d) {
    rd.push_back(std::vector<double>(r.range_doppler.begin() + d * kRangeBins,
                                     r.range_doppler.begin() + (d + 1) * kRangeBins));
  }
  j["range_doppler"] = std::move(rd);
  j["imu_z"] = r.imu_z;
  j["label"] = r.label ? ordered_json(std::string(to_string(*r.label))) : ordered_json(nullptr);
  j["user"] = r.user ? ordered_json(*r.user) : ordered_json(nullptr);
  return j.dump();
}

DatasetRecord record_from_json(const std::string& line) {
  ordered_json j;
  try {
    j = ordered_json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw JsonlError(0, std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw JsonlError(0, "record must be a JSON object");

  DatasetRecord r;
  if (!j.contains("timestamp") || !j["timestamp"].is_number()) {
    throw JsonlError(0, "field 'timestamp' must be a number");
  }
  r.timestamp = j["timestamp"].get<double>();
  r.range_profile = read_vector(j, "range_profile", kRangeBins);
  r.noise_profile = read_vector(j, "noise_profile", kRangeBins);

  if (!j.contains("range_doppler") || !j["range_doppler"].is_array() ||
      j["range_doppler"].size() != kDopplerBins) {
    throw JsonlError(0, "field 'range_doppler' must be a 16x64 nested array");
  }
  r.range_doppler.reserve(kRangeBins * kDopplerBins);
  for (const auto& row : j["range_doppler"]) {
    if (!row.is_array() || row.size() != kRangeBins) {
      throw JsonlError(0, "field 'range_doppler' rows must hold 64 numbers");
    }
    for (const auto& x : row) {
      if (!x.is_number()) throw JsonlError(0, "field 'range_doppler' has a non-number");
      r.range_doppler.push_back(x.get<double>());
    }
  }

  if (!j.contains("imu_z") || !j["imu_z"].is_number()) {
    throw JsonlError(0, "field 'imu_z' must be a number");
  }
  r.imu_z = j["imu_z"].get<double>();

  if (j.contains("label") && !j["label"].is_null()) {
    if (!j["label"].is_string()) throw JsonlError(0, "field 'label' must be a string or null");
    const auto name = j["label"].get<std::string>();
    auto a = parse_activity(name);
    if (!a) throw JsonlError(0, "field 'label' has unknown activity '" + name + "'");
    r.label = *a;
  }
  if (j.contains("user") && !j["user"].is_null()) {
    if (!j["user"].is_string()) throw JsonlError(0, "field 'user' must be a string or null");
    r.user = j["user"].get<std::string>();
  }
  return r;
}

void write_jsonl(std::ostream& out, std::span<const DatasetRecord> records) {
  for (const auto& r : records) out << record_to_json(r) << '\n';
}

JsonlReadResult read_jsonl(std::istream& in, JsonlMode mode) {
  JsonlReadResult result;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    try {
      result.records.push_back(record_from_json(line));
    } catch (const JsonlError& e) {
      JsonlError located(number, e.what());
      if (mode == JsonlMode::Strict) throw located;
      result.errors.push_back(located);
    }
  }
  return result;
}

void write_imu_csv(std::ostream& out, std::span<const ImuSample> samples) {
  out << "timestamp,accel_z\n";
  std::ostringstream line;
  line << std::setprecision(17);
  for (const auto& s : samples) {
    line.str("");
    line << s.timestamp << ',' << s.accel_z << '\n';
    out << line.str();
  }
}

std::vector<ImuSample> read_imu_csv(std::istream& in) {
  std::vector<ImuSample> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (number == 1 && line.rfind("timestamp", 0) == 0) continue;
    if (line.empty()) continue;
    std::istringstream ss(line);
    ImuSample s;
    char comma = 0;
    if (!(ss >> s.timestamp >> comma >> s.accel_z) || comma != ',') {
      throw JsonlError(number, "malformed IMU line");
    }
    if (!out.empty() && !(s.timestamp > out.back().timestamp)) {
      throw JsonlError(number, "IMU timestamps must be strictly increasing");
    }
    out.push_back(s);
  }
  return out;
}

}  // namespace mmdrive
