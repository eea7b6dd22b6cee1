#include "mmdrive/metrics.hpp"

#include <algorithm>
#include <numeric>

#include "mmdrive/error.hpp"

namespace mmdrive {
namespace {

void check_binary(std::span<const int> truths, std::span<const double> scores) {
  if (truths.size() != scores.size()) {
    throw InvalidArgument("roc: " + std::to_string(truths.size()) + " truths but " +
                          std::to_string(scores.size()) + " scores");
  }
  for (int t : truths) {
    if (t != 0 && t != 1) throw InvalidArgument("roc: truths must be 0 or 1");
  }
}

}  // namespace

std::vector<RocPoint> roc_curve(std::span<const int> truths, std::span<const double> scores) {
  check_binary(truths, scores);
  const auto pos = static_cast<std::size_t>(std::count(truths.begin(), truths.end(), 1));
  const std::size_t neg = truths.size() - pos;
  if (pos == 0 || neg == 0) throw InvalidArgument("roc: both classes are required");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  std::vector<RocPoint> points{{0.0, 0.0}};
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double s = scores[order[i]];
    // Every item sharing this score flips at the same threshold.
    for (; i < order.size() && scores[order[i]] == s; ++i) {
      if (truths[order[i]] == 1) ++tp; else ++fp;
    }
    points.push_back({static_cast<double>(fp) / static_cast<double>(neg),
                      static_cast<double>(tp) / static_cast<double>(pos)});
  }
  return points;
}

double roc_auc(std::span<const int> truths, std::span<const double> scores) {
  const auto pts = roc_curve(truths, scores);
  double area = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    area += (pts[i].fpr - pts[i - 1].fpr) * (pts[i].tpr + pts[i - 1].tpr) / 2.0;
  }
  return area;
}

MetricsReport compute_metrics(std::span<const int> predictions, std::span<const int> truths,
                              std::span<const double> positive_scores, std::size_t num_classes) {
  if (predictions.size() != truths.size()) {
    throw InvalidArgument("compute_metrics: " + std::to_string(predictions.size()) +
                          " predictions but " + std::to_string(truths.size()) + " truths");
  }
  if (truths.empty()) throw InvalidArgument("compute_metrics: no items");
  if (!positive_scores.empty() && positive_scores.size() != truths.size()) {
    throw InvalidArgument("compute_metrics: score count does not match truths");
  }
  int top = 0;
  for (std::size_t i = 0; i < truths.size(); ++i) {
    if (truths[i] < 0 || predictions[i] < 0) throw InvalidArgument("compute_metrics: negative label");
    top = std::max({top, truths[i], predictions[i]});
  }
  const std::size_t k = num_classes ? num_classes : static_cast<std::size_t>(top) + 1;
  if (static_cast<std::size_t>(top) >= k) {
    throw InvalidArgument("compute_metrics: label " + std::to_string(top) + " outside " +
                          std::to_string(k) + " classes");
  }

  MetricsReport r;
  r.classes = k;
  r.confusion.assign(k, std::vector<std::size_t>(k, 0));
  for (std::size_t i = 0; i < truths.size(); ++i) {
    ++r.confusion[static_cast<std::size_t>(truths[i])][static_cast<std::size_t>(predictions[i])];
  }

  const auto n = static_cast<double>(truths.size());
  std::size_t correct = 0;
  r.per_class.resize(k);
  for (std::size_t c = 0; c < k; ++c) {
    ClassMetrics& m = r.per_class[c];
    const std::size_t tp = r.confusion[c][c];
    correct += tp;
    for (std::size_t j = 0; j < k; ++j) {
      m.support += r.confusion[c][j];
      m.predicted += r.confusion[j][c];
    }
    m.precision = m.predicted ? static_cast<double>(tp) / static_cast<double>(m.predicted) : 0.0;
    m.recall = m.support ? static_cast<double>(tp) / static_cast<double>(m.support) : 0.0;
    const double denom = m.precision + m.recall;
    m.f1 = denom > 0.0 ? 2.0 * m.precision * m.recall / denom : 0.0;
  }
  double weighted = 0.0, macro = 0.0;
  for (const ClassMetrics& m : r.per_class) {
    weighted += static_cast<double>(m.support) * m.f1;
    macro += m.f1;
  }
  r.weighted_f1 = weighted / n;
  r.macro_f1 = macro / static_cast<double>(k);
  r.accuracy = static_cast<double>(correct) / n;

  if (!positive_scores.empty()) {
    check_binary(truths, positive_scores);
    const auto pos = std::count(truths.begin(), truths.end(), 1);
    if (pos > 0 && static_cast<std::size_t>(pos) < truths.size()) {
      r.roc = roc_curve(truths, positive_scores);
      double area = 0.0;
      for (std::size_t i = 1; i < r.roc.size(); ++i) {
        area += (r.roc[i].fpr - r.roc[i - 1].fpr) * (r.roc[i].tpr + r.roc[i - 1].tpr) / 2.0;
      }
      r.auc = area;
    }
  }
  return r;
}

}  // namespace mmdrive
