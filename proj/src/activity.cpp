#include "mmdrive/activity.hpp"

#include "mmdrive/error.hpp"

namespace mmdrive {
namespace {

constexpr std::array<std::string_view, kActivityCount> kNames = {
    "Normal",  "Drinking",     "FetchingForward", "SteeringAnomaly", "Nodding",
    "Yawning", "PickingDrops", "UsingPhone",      "TurningBack",     "TalkingLeft",
};

}  // namespace

int dangerous_index(Activity a) {
  if (!is_valid(a) || !is_dangerous(a)) {
    throw InvalidArgument("dangerous_index: activity is not a dangerous class");
  }
  return static_cast<int>(a) - 1;
}

Activity from_dangerous_index(int index) {
  if (index < 0 || index >= kDangerousCount) {
    throw InvalidArgument("from_dangerous_index: index " + std::to_string(index) +
                          " outside [0, 9)");
  }
  return static_cast<Activity>(index + 1);
}

Activity activity_from_index(int index) {
  if (index < 0 || index >= kActivityCount) {
    throw InvalidArgument("unknown activity index " + std::to_string(index));
  }
  return static_cast<Activity>(index);
}

std::string_view to_string(Activity a) {
  if (!is_valid(a)) return "Unknown";
  return kNames[static_cast<std::size_t>(a)];
}

std::optional<Activity> parse_activity(std::string_view name) {
  for (std::size_t i = 0; i < kNames.size(); ++i) {
    if (kNames[i] == name) return static_cast<Activity>(i);
  }
  return std::nullopt;
}

const std::array<Activity, kActivityCount>& all_activities() {
  static const std::array<Activity, kActivityCount> all = [] {
    std::array<Activity, kActivityCount> out{};
    for (int i = 0; i < kActivityCount; ++i) out[i] = static_cast<Activity>(i);
    return out;
  }();
  return all;
}

}  // namespace mmdrive
