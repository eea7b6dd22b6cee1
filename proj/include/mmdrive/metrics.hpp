#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace mmdrive {

struct ClassMetrics {
  std::size_t support = 0;
  std::size_t predicted = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
};

struct MetricsReport {
  std::size_t classes = 0;
  std::vector<std::vector<std::size_t>> confusion;  // [truth][prediction]
  std::vector<ClassMetrics> per_class;
  double accuracy = 0.0;
  double weighted_f1 = 0.0;
  double macro_f1 = 0.0;
  std::vector<RocPoint> roc;     // only with scores
  std::optional<double> auc;
};

/// Labels are class indices. `num_classes` 0 means 1 + the largest label
/// seen. With `positive_scores`, truths must be 0/1 and ROC/AUC is filled
/// in when both classes are present.
MetricsReport compute_metrics(std::span<const int> predictions, std::span<const int> truths,
                              std::span<const double> positive_scores = {},
                              std::size_t num_classes = 0);

/// Operating points at every distinct score, from (0,0) to (1,1).
std::vector<RocPoint> roc_curve(std::span<const int> truths, std::span<const double> scores);
/// Trapezoidal area under roc_curve(); throws if a class is missing.
double roc_auc(std::span<const int> truths, std::span<const double> scores);

}  // namespace mmdrive
