#include "mmdrive/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <array>
#include <string>

#include "mmdrive/error.hpp"

namespace mmdrive {
namespace {

double median_of(std::vector<double>& v) {
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  double m = v[mid];
  if (v.size() % 2 == 0) {
    const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
    m = 0.5 * (m + lower);
  }
  return m;
}

Activity window_label(std::span<const Activity> labels) {
  std::array<int, kActivityCount> counts{};
  for (Activity a : labels) ++counts[static_cast<std::size_t>(a)];
  const int best = *std::max_element(counts.begin(), counts.end());
  // Ties resolve to the most recent frame carrying a top count.
  for (auto it = labels.rbegin(); it != labels.rend(); ++it) {
    if (counts[static_cast<std::size_t>(*it)] == best) return *it;
  }
  return labels.back();
}

}  // namespace

std::vector<Interval> detect_bumps(std::span<const ImuSample> imu,
                                   const BumpDetectorOptions& options) {
  std::vector<Interval> out;
  if (imu.size() < 2) return out;
  for (std::size_t i = 1; i < imu.size(); ++i) {
    if (!(imu[i].timestamp > imu[i - 1].timestamp)) {
      throw InvalidArgument("detect_bumps: timestamps must be strictly increasing (sample " +
                            std::to_string(i) + ")");
    }
  }
  if (!(options.k > 0.0)) throw InvalidArgument("detect_bumps: k must be positive");

  std::vector<double> dts(imu.size() - 1);
  for (std::size_t i = 1; i < imu.size(); ++i) dts[i - 1] = imu[i].timestamp - imu[i - 1].timestamp;
  const double dt = median_of(dts);
  const auto half = static_cast<std::size_t>(
      std::max(1.0, std::round(0.5 * options.median_window / dt)));

  const std::size_t n = imu.size();
  std::vector<double> residual(n);
  std::vector<double> window;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i >= half ? i - half : 0;
    const std::size_t hi = std::min(n - 1, i + half);
    window.clear();
    for (std::size_t j = lo; j <= hi; ++j) window.push_back(imu[j].accel_z);
    residual[i] = imu[i].accel_z - median_of(window);
  }

  std::vector<double> scratch = residual;
  const double center = median_of(scratch);
  for (std::size_t i = 0; i < n; ++i) scratch[i] = std::abs(residual[i] - center);
  const double sigma = 1.4826 * median_of(scratch);
  const double threshold = options.k * sigma;

  bool open = false;
  Interval current{};
  for (std::size_t i = 0; i < n; ++i) {
    const double dev = std::abs(residual[i] - center);
    if (!(dev > threshold) || dev < 1e-9) continue;
    const double t = imu[i].timestamp;
    if (open && t - current.end < options.merge_gap) {
      current.end = t;
    } else {
      if (open) out.push_back(current);
      current = {t, t};
      open = true;
    }
  }
  if (open) out.push_back(current);
  for (auto& iv : out) {
    iv.start -= options.padding;
    iv.end += options.padding;
  }
  return out;
}

bool in_any_interval(double t, std::span<const Interval> intervals) {
  return std::any_of(intervals.begin(), intervals.end(),
                     [t](const Interval& iv) { return iv.contains(t); });
}

std::vector<bool> gate_mask(std::span<const RadarFrame> frames, std::span<const Interval> bumps) {
  std::vector<bool> keep(frames.size());
  for (std::size_t i = 0; i < frames.size(); ++i) {
    keep[i] = !in_any_interval(frames[i].timestamp, bumps);
  }
  return keep;
}

std::vector<RadarFrame> gate_frames(std::span<const RadarFrame> frames,
                                    std::span<const Interval> bumps) {
  std::vector<RadarFrame> out;
  out.reserve(frames.size());
  for (const auto& f : frames) {
    if (!in_any_interval(f.timestamp, bumps)) out.push_back(f);
  }
  return out;
}

std::size_t window_count(std::size_t n, int window, int stride) {
  if (window < 1 || stride < 1) throw InvalidArgument("window_count: window and stride must be >= 1");
  if (n < static_cast<std::size_t>(window)) return 0;
  return (n - static_cast<std::size_t>(window)) / static_cast<std::size_t>(stride) + 1;
}

std::vector<StackedSample> stack_frames(std::span<const RadarFrame> frames,
                                        std::span<const Activity> labels,
                                        const StackOptions& options,
                                        std::span<const int> segments) {
  if (options.window < 1 || options.stride < 1) {
    throw InvalidArgument("stack_frames: window and stride must be >= 1");
  }
  if (labels.size() != frames.size()) {
    throw InvalidArgument("stack_frames: one label per frame required");
  }
  if (!segments.empty() && segments.size() != frames.size()) {
    throw InvalidArgument("stack_frames: one segment id per frame required");
  }
  std::vector<StackedSample> out;
  if (frames.empty()) return out;

  const std::size_t range_bins = frames.front().range_bins();
  const std::size_t doppler_bins = frames.front().doppler_bins();
  for (const auto& f : frames) {
    if (f.range_bins() != range_bins || f.noise_profile.size() != range_bins ||
        f.range_doppler.size() != range_bins * doppler_bins) {
      throw InvalidArgument("stack_frames: inconsistent frame dimensions");
    }
  }

  const auto window = static_cast<std::size_t>(options.window);
  const auto stride = static_cast<std::size_t>(options.stride);
  const double max_gap = 1.5 * options.frame_period;

  auto emit_run = [&](std::size_t begin, std::size_t end) {
    for (std::size_t s = begin; s + window <= end; s += stride) {
      StackedSample sample;
      sample.rn = Tensor({range_bins, 2, window});
      sample.rd = Tensor({doppler_bins, range_bins, window});
      for (std::size_t f = 0; f < window; ++f) {
        const RadarFrame& fr = frames[s + f];
        for (std::size_t r = 0; r < range_bins; ++r) {
          sample.rn.at(r, 0, f) = fr.range_profile[r];
          sample.rn.at(r, 1, f) = fr.noise_profile[r];
        }
        for (std::size_t d = 0; d < doppler_bins; ++d) {
          for (std::size_t r = 0; r < range_bins; ++r) {
            sample.rd.at(d, r, f) = fr.range_doppler[d * range_bins + r];
          }
        }
      }
      sample.label = window_label(labels.subspan(s, window));
      sample.window_start = frames[s].timestamp;
      sample.segment = segments.empty() ? -1 : segments[s];
      out.push_back(std::move(sample));
    }
  };

  std::size_t run_start = 0;
  for (std::size_t i = 1; i <= frames.size(); ++i) {
    const bool breaks =
        i == frames.size() || frames[i].timestamp - frames[i - 1].timestamp > max_gap ||
        (!segments.empty() && segments[i] != segments[i - 1]);
    if (breaks) {
      emit_run(run_start, i);
      run_start = i;
    }
  }
  return out;
}

namespace {

// Order statistic at floor(q * (n - 1)); q = 0 and q = 1 are the exact extremes.
double quantile_of(std::vector<double>& v, double q) {
  const auto k = static_cast<std::size_t>(std::floor(q * static_cast<double>(v.size() - 1)));
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), v.end());
  return v[k];
}

}  // namespace

NormStats fit_norm(std::span<const StackedSample> train, const NormOptions& options) {
  if (train.empty()) throw InvalidArgument("fit_norm: empty training set");
  if (!(options.lower_quantile >= 0.0 && options.lower_quantile < options.upper_quantile &&
        options.upper_quantile <= 1.0)) {
    throw InvalidArgument("fit_norm: quantiles must satisfy 0 <= lower < upper <= 1");
  }
  std::vector<double> rn, rd;
  for (const auto& x : train) {
    rn.insert(rn.end(), x.rn.storage().begin(), x.rn.storage().end());
    rd.insert(rd.end(), x.rd.storage().begin(), x.rd.storage().end());
  }
  if (rn.empty() || rd.empty()) throw InvalidArgument("fit_norm: samples hold no values");
  NormStats s;
  s.rn_max = quantile_of(rn, options.upper_quantile);
  s.rn_min = quantile_of(rn, options.lower_quantile);
  s.rd_max = quantile_of(rd, options.upper_quantile);
  s.rd_min = quantile_of(rd, options.lower_quantile);
  return s;
}

double normalize_value(double x, double lo, double hi) {
  if (!(hi > lo)) return 0.0;
  return std::clamp((x - lo) / (hi - lo), 0.0, 1.0);
}

StackedSample apply_norm(StackedSample sample, const NormStats& stats) {
  for (double& v : sample.rn.storage()) v = normalize_value(v, stats.rn_min, stats.rn_max);
  for (double& v : sample.rd.storage()) v = normalize_value(v, stats.rd_min, stats.rd_max);
  return sample;
}

void apply_norm_inplace(std::span<StackedSample> samples, const NormStats& stats) {
  for (auto& s : samples) {
    for (double& v : s.rn.storage()) v = normalize_value(v, stats.rn_min, stats.rn_max);
    for (double& v : s.rd.storage()) v = normalize_value(v, stats.rd_min, stats.rd_max);
  }
}

}  // namespace mmdrive
