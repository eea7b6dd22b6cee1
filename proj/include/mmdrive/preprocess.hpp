#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mmdrive/activity.hpp"
#include "mmdrive/tensor.hpp"
#include "mmdrive/types.hpp"

namespace mmdrive {

inline constexpr int kDefaultWindow = 10;

/// Model input for one window of stacked frames.
///   rn: range bins x {range profile, noise profile} x frames  (64 x 2 x W)
///   rd: doppler bins x range bins x frames                    (16 x 64 x W)
struct StackedSample {
  Tensor rn;
  Tensor rd;
  Activity label = Activity::Normal;
  double window_start = 0.0;
  int segment = -1;
};

struct BumpDetectorOptions {
  double k = 5.0;              // threshold in robust standard deviations
  double median_window = 1.0;  // s, centered rolling median
  double merge_gap = 0.5;      // s
  double padding = 0.3;        // s, added on both sides
};

/// Intervals where |accel_z - rolling median| exceeds k * sigma, with sigma
/// the scaled median absolute deviation of the residual stream.
std::vector<Interval> detect_bumps(std::span<const ImuSample> imu,
                                   const BumpDetectorOptions& options = {});

bool in_any_interval(double t, std::span<const Interval> intervals);

/// keep[i] is false when frame i lies inside a bump interval.
std::vector<bool> gate_mask(std::span<const RadarFrame> frames, std::span<const Interval> bumps);

/// Frames outside every bump interval, original order preserved.
std::vector<RadarFrame> gate_frames(std::span<const RadarFrame> frames,
                                    std::span<const Interval> bumps);

struct StackOptions {
  int window = kDefaultWindow;
  int stride = 1;
  /// Frames further apart than 1.5 periods start a new run.
  double frame_period = 0.2;
};

/// Sliding windows over contiguous runs. A run breaks at timestamp gaps and,
/// when `segments` is given, wherever the segment id changes. Window label
/// is the majority frame label, ties going to the latest frame's label.
std::vector<StackedSample> stack_frames(std::span<const RadarFrame> frames,
                                        std::span<const Activity> labels,
                                        const StackOptions& options,
                                        std::span<const int> segments = {});

/// Number of windows stack_frames yields for one run of n frames.
std::size_t window_count(std::size_t n, int window, int stride);

/// One (min, max) pair per tensor kind, fitted on the training split.
struct NormStats {
  double rn_min = 0.0;
  double rn_max = 1.0;
  double rd_min = 0.0;
  double rd_max = 1.0;
};

/// Bounds are order statistics of all training values. The default lower
/// bound is the median: most cells hold receiver noise, so the noise floor
/// maps to (and clamps at) 0 and only returns above it stay positive.
/// lower_quantile 0 with upper_quantile 1 is the plain min-max scaler.
struct NormOptions {
  double lower_quantile = 0.5;
  double upper_quantile = 1.0;
};

NormStats fit_norm(std::span<const StackedSample> train, const NormOptions& options = {});
/// (x - min) / (max - min) clamped to [0, 1]; a degenerate range maps to 0.
StackedSample apply_norm(StackedSample sample, const NormStats& stats);
void apply_norm_inplace(std::span<StackedSample> samples, const NormStats& stats);
double normalize_value(double x, double lo, double hi);

}  // namespace mmdrive
