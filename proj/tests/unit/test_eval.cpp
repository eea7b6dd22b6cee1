#include <algorithm>
#include <random>
#include <set>
#include <sstream>

#include "doctest.h"
#include "mmdrive/error.hpp"
#include "mmdrive/experiments.hpp"
#include "mmdrive/metrics.hpp"
#include "../support/oracles.hpp"

using namespace mmdrive;

namespace {

std::vector<StackedSample> segment_samples(int segments, int per_segment, Activity label) {
  std::vector<StackedSample> out;
  for (int s = 0; s < segments; ++s) {
    for (int i = 0; i < per_segment; ++i) {
      StackedSample x{Tensor({1}), Tensor({1}), label, 0.2 * i, s};
      out.push_back(std::move(x));
    }
  }
  return out;
}

PipelineConfig tiny_config() {
  PipelineConfig c;
  c.arch.rn_channels = {4, 4, 4};
  c.arch.rd_channels = {4, 4, 4, 4};
  c.arch.hidden = 8;
  c.ddb.epochs = 1;
  c.dvn.epochs = 1;
  c.train_stride = 3;
  return c;
}

LabeledFrames tiny_data() {
  SyntheticDatasetOptions o;
  o.segments_per_class = 3;
  o.segment_duration = 3.0;
  o.seed = 3;
  return synthesize_dataset(o);
}

}  // namespace

TEST_SUITE("eval") {

TEST_CASE("metrics agree with the per-definition oracle") {
  std::mt19937_64 rng(17);
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t k = 2 + rng() % 8;
    const std::size_t n = 1 + rng() % 200;
    std::vector<int> p(n), t(n);
    for (std::size_t i = 0; i < n; ++i) {
      t[i] = static_cast<int>(rng() % k);
      p[i] = rng() % 3 == 0 ? t[i] : static_cast<int>(rng() % k);
    }
    const auto m = compute_metrics(p, t, {}, k);
    const auto o = oracle::naive_metrics(p, t, k);
    CHECK(m.confusion == o.confusion);
    CHECK(m.accuracy == doctest::Approx(o.accuracy).epsilon(1e-12));
    CHECK(m.weighted_f1 == doctest::Approx(o.weighted_f1).epsilon(1e-12));
    for (std::size_t c = 0; c < k; ++c) {
      CHECK(m.per_class[c].precision == doctest::Approx(o.precision[c]).epsilon(1e-12));
      CHECK(m.per_class[c].recall == doctest::Approx(o.recall[c]).epsilon(1e-12));
      CHECK(m.per_class[c].f1 == doctest::Approx(o.f1[c]).epsilon(1e-12));
    }
  }
}

TEST_CASE("metric edge cases") {
  const std::vector<int> a{0, 1}, b{0};
  CHECK_THROWS_AS(compute_metrics(a, b), InvalidArgument);
  CHECK_THROWS_AS(compute_metrics(std::vector<int>{}, std::vector<int>{}), InvalidArgument);
  const std::vector<int> t{0, 0, 1, 1};
  const std::vector<int> p{0, 0, 1, 1};
  const auto perfect = compute_metrics(p, t);
  CHECK(perfect.accuracy == 1.0);
  CHECK(perfect.weighted_f1 == 1.0);
  // A class that is never predicted contributes f1 = 0 instead of NaN.
  const std::vector<int> all_zero{0, 0, 0, 0};
  const auto m = compute_metrics(all_zero, t);
  CHECK(m.per_class[1].precision == 0.0);
  CHECK(m.per_class[1].f1 == 0.0);
  CHECK(m.weighted_f1 == doctest::Approx(0.5 * (2.0 / 3.0)));
}

TEST_CASE("roc and auc") {
  const std::vector<int> t{0, 0, 1, 1};
  CHECK(roc_auc(t, std::vector<double>{0.1, 0.2, 0.8, 0.9}) == 1.0);
  CHECK(roc_auc(t, std::vector<double>{0.9, 0.8, 0.2, 0.1}) == 0.0);
  CHECK(roc_auc(t, std::vector<double>{0.5, 0.5, 0.5, 0.5}) == 0.5);
  const auto roc = roc_curve(t, std::vector<double>{0.1, 0.2, 0.8, 0.9});
  CHECK(roc.front().fpr == 0.0);
  CHECK(roc.front().tpr == 0.0);
  CHECK(roc.back().fpr == 1.0);
  CHECK(roc.back().tpr == 1.0);
  CHECK(roc_auc(std::vector<int>{1, 0, 1, 0}, std::vector<double>{0.9, 0.1, 0.8, 0.2}) == 1.0);
  CHECK(roc_auc(std::vector<int>{1, 0}, std::vector<double>{0.3, 0.7}) == 0.0);
  const std::vector<int> one{1, 1};
  CHECK_THROWS_AS(roc_auc(one, std::vector<double>{0.1, 0.2}), InvalidArgument);
  const auto no_auc = compute_metrics(one, one, std::vector<double>{0.3, 0.4});
  CHECK(!no_auc.auc);

  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int rep = 0; rep < 30; ++rep) {
    const std::size_t n = 20 + rng() % 300;
    std::vector<int> y(n);
    std::vector<double> s(n);
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = static_cast<int>(rng() % 2);
      s[i] = std::round(u(rng) * 20.0) / 20.0 + (y[i] ? 0.1 : 0.0);
    }
    y[0] = 0;
    y[1] = 1;
    CHECK(roc_auc(y, s) == doctest::Approx(oracle::pairwise_auc(y, s)).epsilon(1e-12));
  }
  // Randomly permuted scores land near one half in at least 99% of trials.
  std::vector<int> y(400);
  std::vector<double> s(400);
  for (std::size_t i = 0; i < y.size(); ++i) {
    y[i] = static_cast<int>(i % 2);
    s[i] = static_cast<double>(i) / 400.0;
  }
  int inside = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::shuffle(s.begin(), s.end(), rng);
    const double auc = roc_auc(y, s);
    inside += auc >= 0.4 && auc <= 0.6;
  }
  CHECK(inside >= 990);
}

TEST_CASE("segment split sizes and leakage") {
  const auto samples = segment_samples(10, 5, Activity::Drinking);
  const auto r = split(samples);
  auto segs = [](const std::vector<StackedSample>& v) {
    std::set<int> s;
    for (const auto& x : v) s.insert(x.segment);
    return s;
  };
  const auto tr = segs(r.train), va = segs(r.val), te = segs(r.test);
  CHECK(te.size() == 3);
  CHECK(va.size() == 1);
  CHECK(tr.size() == 6);
  CHECK(r.train.size() + r.val.size() + r.test.size() == samples.size());
  for (int s : te) {
    CHECK(!tr.count(s));
    CHECK(!va.count(s));
  }
  for (int s : va) CHECK(!tr.count(s));
  CHECK_THROWS_AS(split(segment_samples(2, 5, Activity::Drinking)), InvalidArgument);
  const auto again = split(samples);
  CHECK(segs(again.test) == te);

  // Stratification keeps every class in the training split.
  std::vector<StackedSample> mixed;
  for (Activity a : all_activities()) {
    auto part = segment_samples(4, 3, a);
    for (auto& x : part) x.segment += 10 * static_cast<int>(a);
    mixed.insert(mixed.end(), part.begin(), part.end());
  }
  const auto m = split(mixed, {.seed = 4});
  std::set<Activity> train_classes;
  for (const auto& x : m.train) train_classes.insert(x.label);
  CHECK(train_classes.size() == 10);
}

TEST_CASE("tiny sweep and comparison produce one row per item") {
  const LabeledFrames data = tiny_data();
  const std::vector<int> windows{1, 2, 3, 4};
  const auto rows = frame_stack_sweep(data, windows, tiny_config());
  REQUIRE(rows.size() == 4);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(rows[i].window == windows[i]);
    CHECK(rows[i].ddb_weighted_f1 >= 0.0);
    CHECK(rows[i].ddb_weighted_f1 <= 1.0);
  }
  const auto again = frame_stack_sweep(data, windows, tiny_config());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(again[i].ddb_weighted_f1 == rows[i].ddb_weighted_f1);
    CHECK(again[i].dvn_auc == rows[i].dvn_auc);
  }
  const int best = best_window(rows);
  CHECK(std::find(windows.begin(), windows.end(), best) != windows.end());
  std::ostringstream csv;
  write_sweep_csv(csv, rows);
  const std::string text = csv.str();
  CHECK(text.rfind("window,ddb_weighted_f1,ddb_accuracy,dvn_auc\n", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 5);

  const std::vector<std::uint64_t> seeds{1};
  auto cfg = tiny_config();
  cfg.window = 2;
  const auto cmp = compare_models(data, seeds, cfg, {.n_estimators = 5});
  REQUIRE(cmp.size() == 2);
  CHECK(cmp[0].model == "fused-cnn");
  CHECK(cmp[1].model == "random-forest");
  CHECK(cmp[0].report.classes == 9);
  CHECK(cmp[1].latency_ms > 0.0);
  const auto rerun = compare_models(data, seeds, cfg, {.n_estimators = 5});
  CHECK(rerun[0].report.weighted_f1 == cmp[0].report.weighted_f1);
  CHECK(rerun[1].report.weighted_f1 == cmp[1].report.weighted_f1);
  std::ostringstream out;
  write_comparison_csv(out, cmp);
  const std::string table = out.str();
  CHECK(std::count(table.begin(), table.end(), '\n') == 1 + 2 * 10);
}

}
