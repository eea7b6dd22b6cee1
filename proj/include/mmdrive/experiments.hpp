#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "mmdrive/baseline_rf.hpp"
#include "mmdrive/dataset_io.hpp"
#include "mmdrive/metrics.hpp"
#include "mmdrive/models.hpp"
#include "mmdrive/preprocess.hpp"
#include "mmdrive/radar_config.hpp"
#include "mmdrive/radar_sim.hpp"

namespace mmdrive {

/// Frames of one or more drives in time order, with per-frame labels and
/// the segment (contiguous recording stretch) each frame belongs to.
struct LabeledFrames {
  std::vector<RadarFrame> frames;
  std::vector<Activity> labels;
  std::vector<int> segments;
  std::vector<ImuSample> imu;
};

/// Segments are the contiguous runs of equal labels. Unlabelled records
/// are rejected.
LabeledFrames frames_from_records(std::span<const DatasetRecord> records,
                                  std::vector<ImuSample> imu = {});

struct SyntheticDatasetOptions {
  int segments_per_class = 6;
  double segment_duration = 8.0;  // s
  std::uint64_t seed = 7;
  RadarConfig config{};
  std::vector<Activity> classes{all_activities().begin(), all_activities().end()};
  std::vector<double> bumps;
};

/// Renders a drive with `segments_per_class` segments of every class in a
/// seeded random order.
LabeledFrames synthesize_dataset(const SyntheticDatasetOptions& options);
std::vector<ScriptSegment> dataset_script(const SyntheticDatasetOptions& options);

struct SplitSpec {
  double test_fraction = 0.3;
  double validation_fraction_of_train = 0.2;
  std::uint64_t seed = 1;
};

struct SplitResult {
  std::vector<StackedSample> train;
  std::vector<StackedSample> val;
  std::vector<StackedSample> test;
};

/// Segment-level split, stratified by segment label: within each label the
/// segments are shuffled, round(test_fraction * n) go to test and
/// round(validation_fraction * rest) of the remainder to validation.
SplitResult split(std::span<const StackedSample> samples, const SplitSpec& spec = {});

struct PipelineConfig {
  int window = kDefaultWindow;
  int stride = 1;
  /// Every train_stride-th training window is used for gradient steps.
  int train_stride = 1;
  bool gate_bumps = true;
  BumpDetectorOptions bump{};
  NormOptions norm{};
  double frame_period = 0.2;
  SplitSpec split{};
  Architecture arch{};
  std::uint64_t model_seed = 1;
  TrainOptions ddb{};
  TrainOptions dvn{};
  double dvn_threshold = 0.5;
};

struct PreparedData {
  SplitResult split;
  NormStats norm;
  std::size_t gated_frames = 0;
};

/// gate -> stack -> split -> normalization fitted on train.
PreparedData prepare(const LabeledFrames& data, const PipelineConfig& config);

struct PipelineResult {
  ModelBundle bundle;
  TrainHistory ddb_history;
  TrainHistory dvn_history;
  MetricsReport ddb_test;   // 9-way on dangerous test windows
  MetricsReport dvn_test;   // binary on all test windows, with AUC
  std::size_t gated_frames = 0;
};

/// Full training and held-out evaluation of the fused model.
PipelineResult run_pipeline(const LabeledFrames& data, const PipelineConfig& config);
MetricsReport evaluate_ddb(const ModelBundle& bundle, std::span<const StackedSample> samples);
MetricsReport evaluate_dvn(const ModelBundle& bundle, std::span<const StackedSample> samples,
                           double threshold);

struct SweepRow {
  int window = 0;
  double ddb_weighted_f1 = 0.0;
  double ddb_accuracy = 0.0;
  double dvn_auc = 0.0;
};

std::vector<SweepRow> frame_stack_sweep(const LabeledFrames& data, std::span<const int> windows,
                                        const PipelineConfig& config);
int best_window(std::span<const SweepRow> rows);
void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows);

struct ModelComparison {
  std::string model;
  std::uint64_t seed = 0;
  MetricsReport report;
  double latency_ms = 0.0;  // mean wall-clock per test window
};

/// Fused-CNN (DDB) vs random forest on the same dangerous-class split,
/// once per seed.
std::vector<ModelComparison> compare_models(const LabeledFrames& data,
                                            std::span<const std::uint64_t> seeds,
                                            const PipelineConfig& config,
                                            const rf::ForestOptions& forest);
/// One row per model x seed x class plus one summary row per model x seed.
void write_comparison_csv(std::ostream& out, std::span<const ModelComparison> rows);
void write_comparison_markdown(std::ostream& out, std::span<const ModelComparison> rows);

void write_metrics_json(std::ostream& out, const MetricsReport& report,
                        std::span<const std::string> class_names);

struct ForestSearchResult {
  rf::ForestOptions best;
  double best_score = 0.0;
  std::vector<std::pair<rf::ForestOptions, double>> trials;
};

/// Randomized search over depth and feature-subset size, scored by
/// validation weighted F1.
ForestSearchResult random_search_forest(std::span<const std::vector<double>> train_x,
                                        std::span<const int> train_y,
                                        std::span<const std::vector<double>> val_x,
                                        std::span<const int> val_y, int trials,
                                        const rf::ForestOptions& base);

}  // namespace mmdrive
