#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace mmdrive {

/// Driver activity classes. `Normal` is the only non-dangerous value; the
/// remaining nine are the dangerous behaviours recognised by the DDB head.
enum class Activity : std::uint8_t {
  Normal = 0,
  Drinking,
  FetchingForward,
  SteeringAnomaly,
  Nodding,
  Yawning,
  PickingDrops,
  UsingPhone,
  TurningBack,
  TalkingLeft,
};

inline constexpr int kActivityCount = 10;
inline constexpr int kDangerousCount = 9;

constexpr bool is_valid(Activity a) {
  return static_cast<int>(a) < kActivityCount;
}
constexpr bool is_dangerous(Activity a) { return a != Activity::Normal; }

/// Index into the 9-way dangerous-class output (0..8).
int dangerous_index(Activity a);
Activity from_dangerous_index(int index);
Activity activity_from_index(int index);

std::string_view to_string(Activity a);
std::optional<Activity> parse_activity(std::string_view name);

const std::array<Activity, kActivityCount>& all_activities();

}  // namespace mmdrive
