#pragma once

#include <cstddef>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "mmdrive/radar_sim.hpp"

namespace mmdrive {

/// Drive script, one directive per line, '#' starts a comment:
///   <Activity> <start s> <duration s>
///   bump <time s>
/// Segments must be listed in time order and may not overlap.
struct DriveScript {
  std::vector<ScriptSegment> segments;
  std::vector<double> bumps;
};

class ScriptError : public std::runtime_error {
 public:
  ScriptError(std::size_t line, std::size_t column, const std::string& message);
  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

DriveScript parse_script(std::istream& in);
DriveScript parse_script_text(const std::string& text);

}  // namespace mmdrive
