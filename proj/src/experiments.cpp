#include "mmdrive/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <map>
#include <ostream>
#include <random>

#include "mmdrive/dsp.hpp"
#include "mmdrive/error.hpp"
#include "mmdrive/radar_sim.hpp"

namespace mmdrive {

LabeledFrames frames_from_records(std::span<const DatasetRecord> records, std::vector<ImuSample> imu) {
  LabeledFrames out;
  out.imu = std::move(imu);
  int segment = -1;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const DatasetRecord& r = records[i];
    if (!r.label) throw InvalidArgument("record " + std::to_string(i + 1) + " has no label");
    if (out.labels.empty() || out.labels.back() != *r.label) ++segment;
    out.frames.push_back(r.to_frame(i));
    out.labels.push_back(*r.label);
    out.segments.push_back(segment);
  }
  return out;
}

std::vector<ScriptSegment> dataset_script(const SyntheticDatasetOptions& options) {
  if (options.segments_per_class < 1) throw InvalidArgument("dataset: segments_per_class must be >= 1");
  if (!(options.segment_duration > 0.0)) throw InvalidArgument("dataset: segment_duration must be > 0");
  if (options.classes.empty()) throw InvalidArgument("dataset: no classes");
  std::vector<Activity> order;
  for (int k = 0; k < options.segments_per_class; ++k) {
    order.insert(order.end(), options.classes.begin(), options.classes.end());
  }
  std::mt19937_64 rng(mix_seed(options.seed, 0xda7a));
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<ScriptSegment> script;
  for (std::size_t i = 0; i < order.size(); ++i) {
    script.push_back({order[i], static_cast<double>(i) * options.segment_duration, options.segment_duration});
  }
  return script;
}

LabeledFrames synthesize_dataset(const SyntheticDatasetOptions& options) {
  const DriveSimulator sim(dataset_script(options), options.config, options.seed, options.bumps);
  LabeledFrames out;
  out.frames.reserve(sim.frame_count());
  for (std::size_t i = 0; i < sim.frame_count(); ++i) {
    RadarFrame f = extract_features(sim.cube(i), options.config, sim.frame_time(i));
    f.frame_index = i;
    out.frames.push_back(std::move(f));
    out.labels.push_back(sim.label(i));
    out.segments.push_back(sim.segment(i));
  }
  out.imu = sim.imu();
  return out;
}

SplitResult split(std::span<const StackedSample> samples, const SplitSpec& spec) {
  if (!(spec.test_fraction > 0.0 && spec.test_fraction < 1.0) ||
      !(spec.validation_fraction_of_train >= 0.0 && spec.validation_fraction_of_train < 1.0)) {
    throw InvalidArgument("split: fractions must lie in (0, 1)");
  }
  // segment id -> label, in first-seen order
  std::map<int, Activity> seg_label;
  std::vector<int> seg_order;
  for (const StackedSample& s : samples) {
    if (seg_label.emplace(s.segment, s.label).second) seg_order.push_back(s.segment);
  }
  if (seg_order.size() < 3) {
    throw InvalidArgument("split: need at least 3 segments, got " + std::to_string(seg_order.size()));
  }
  std::map<Activity, std::vector<int>> by_label;
  for (int seg : seg_order) by_label[seg_label[seg]].push_back(seg);

  enum class Part { Train, Val, Test };
  std::map<int, Part> part;
  std::mt19937_64 rng(mix_seed(spec.seed, 0x5b1175ULL));
  for (auto& [label, segs] : by_label) {
    std::shuffle(segs.begin(), segs.end(), rng);
    const auto n = static_cast<double>(segs.size());
    const auto n_test = static_cast<std::size_t>(std::lround(spec.test_fraction * n));
    const auto n_val = static_cast<std::size_t>(
        std::lround(spec.validation_fraction_of_train * static_cast<double>(segs.size() - n_test)));
    for (std::size_t i = 0; i < segs.size(); ++i) {
      part[segs[i]] = i < n_test ? Part::Test : (i < n_test + n_val ? Part::Val : Part::Train);
    }
  }
  SplitResult out;
  for (const StackedSample& s : samples) {
    switch (part[s.segment]) {
      case Part::Train: out.train.push_back(s); break;
      case Part::Val: out.val.push_back(s); break;
      case Part::Test: out.test.push_back(s); break;
    }
  }
  return out;
}

PreparedData prepare(const LabeledFrames& data, const PipelineConfig& config) {
  if (data.frames.size() != data.labels.size() || data.frames.size() != data.segments.size()) {
    throw InvalidArgument("prepare: frames, labels and segments differ in length");
  }
  PreparedData out;
  std::vector<RadarFrame> frames;
  std::vector<Activity> labels;
  std::vector<int> segments;
  std::vector<bool> keep(data.frames.size(), true);
  if (config.gate_bumps && !data.imu.empty()) {
    keep = gate_mask(data.frames, detect_bumps(data.imu, config.bump));
  }
  for (std::size_t i = 0; i < data.frames.size(); ++i) {
    if (!keep[i]) {
      ++out.gated_frames;
      continue;
    }
    frames.push_back(data.frames[i]);
    labels.push_back(data.labels[i]);
    segments.push_back(data.segments[i]);
  }
  const StackOptions so{config.window, config.stride, config.frame_period};
  const auto samples = stack_frames(frames, labels, so, segments);
  out.split = split(samples, config.split);
  if (out.split.train.empty()) throw InvalidArgument("prepare: training split is empty");
  out.norm = fit_norm(out.split.train, config.norm);
  apply_norm_inplace(out.split.train, out.norm);
  apply_norm_inplace(out.split.val, out.norm);
  apply_norm_inplace(out.split.test, out.norm);
  return out;
}

namespace {

std::vector<StackedSample> thinned(std::span<const StackedSample> in, int stride, bool dangerous_only) {
  std::vector<StackedSample> out;
  std::size_t k = 0;
  for (const StackedSample& s : in) {
    if (dangerous_only && !is_dangerous(s.label)) continue;
    if (k++ % static_cast<std::size_t>(stride) == 0) out.push_back(s);
  }
  return out;
}

MetricsReport ddb_report(const ModelBundle& b, std::span<const StackedSample> samples,
                         std::span<const Tensor> emb) {
  std::vector<int> pred, truth;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!is_dangerous(samples[i].label)) continue;
    const auto p = ddb_probabilities(b, emb[i]);
    pred.push_back(static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin()));
    truth.push_back(dangerous_index(samples[i].label));
  }
  if (truth.empty()) throw InvalidArgument("evaluate_ddb: no dangerous samples");
  return compute_metrics(pred, truth, {}, kDangerousCount);
}

MetricsReport dvn_report(const ModelBundle& b, std::span<const StackedSample> samples,
                         std::span<const Tensor> emb, double threshold) {
  std::vector<int> pred, truth;
  std::vector<double> scores;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double s = dvn_score(b, emb[i]);
    scores.push_back(s);
    pred.push_back(s >= threshold ? 1 : 0);
    truth.push_back(is_dangerous(samples[i].label) ? 1 : 0);
  }
  return compute_metrics(pred, truth, scores, 2);
}

std::vector<Tensor> embed_all(const ModelBundle& b, std::span<const StackedSample> samples) {
  std::vector<Tensor> out;
  out.reserve(samples.size());
  for (const StackedSample& s : samples) out.push_back(embed(b, s));
  return out;
}

PipelineResult run_prepared(const PreparedData& data, const PipelineConfig& config) {
  if (config.train_stride < 1) throw InvalidArgument("pipeline: train_stride must be >= 1");
  Architecture arch = config.arch;
  arch.window = config.window;
  PipelineResult r{build_bundle(config.model_seed, arch), {}, {}, {}, {}, 0};
  r.bundle.norm_stats = data.norm;
  r.gated_frames = data.gated_frames;

  const auto ddb_train = thinned(data.split.train, config.train_stride, true);
  const auto ddb_val = thinned(data.split.val, config.train_stride, true);
  r.ddb_history = train_ddb(r.bundle, ddb_train, ddb_val, config.ddb);
  const auto dvn_train = thinned(data.split.train, config.train_stride, false);
  const auto dvn_val = thinned(data.split.val, config.train_stride, false);
  r.dvn_history = train_dvn(r.bundle, dvn_train, dvn_val, config.dvn);

  const auto emb = embed_all(r.bundle, data.split.test);
  r.ddb_test = ddb_report(r.bundle, data.split.test, emb);
  r.dvn_test = dvn_report(r.bundle, data.split.test, emb, config.dvn_threshold);
  r.bundle.training["pipeline"] = {{"window", config.window},
                                   {"stride", config.stride},
                                   {"train_stride", config.train_stride},
                                   {"split_seed", config.split.seed},
                                   {"dvn_threshold", config.dvn_threshold}};
  return r;
}

}  // namespace

PipelineResult run_pipeline(const LabeledFrames& data, const PipelineConfig& config) {
  return run_prepared(prepare(data, config), config);
}

MetricsReport evaluate_ddb(const ModelBundle& bundle, std::span<const StackedSample> samples) {
  return ddb_report(bundle, samples, embed_all(bundle, samples));
}

MetricsReport evaluate_dvn(const ModelBundle& bundle, std::span<const StackedSample> samples,
                           double threshold) {
  return dvn_report(bundle, samples, embed_all(bundle, samples), threshold);
}

std::vector<SweepRow> frame_stack_sweep(const LabeledFrames& data, std::span<const int> windows,
                                        const PipelineConfig& config) {
  std::vector<SweepRow> rows;
  for (int w : windows) {
    PipelineConfig c = config;
    c.window = w;
    const PipelineResult r = run_pipeline(data, c);
    rows.push_back({w, r.ddb_test.weighted_f1, r.ddb_test.accuracy, r.dvn_test.auc.value_or(0.0)});
  }
  return rows;
}

int best_window(std::span<const SweepRow> rows) {
  if (rows.empty()) throw InvalidArgument("best_window: empty sweep");
  const SweepRow* best = &rows[0];
  for (const SweepRow& r : rows) {
    if (r.ddb_weighted_f1 > best->ddb_weighted_f1) best = &r;
  }
  return best->window;
}

void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows) {
  out << "window,ddb_weighted_f1,ddb_accuracy,dvn_auc\n" << std::setprecision(6);
  for (const SweepRow& r : rows) {
    out << r.window << ',' << r.ddb_weighted_f1 << ',' << r.ddb_accuracy << ',' << r.dvn_auc << '\n';
  }
}

std::vector<ModelComparison> compare_models(const LabeledFrames& data,
                                            std::span<const std::uint64_t> seeds,
                                            const PipelineConfig& config,
                                            const rf::ForestOptions& forest) {
  using Clock = std::chrono::steady_clock;
  std::vector<ModelComparison> out;
  for (std::uint64_t seed : seeds) {
    PipelineConfig c = config;
    c.split.seed = seed;
    c.model_seed = seed;
    c.ddb.seed = seed;
    c.dvn.seed = seed;
    const PreparedData prep = prepare(data, c);
    const PipelineResult cnn = run_prepared(prep, c);

    std::vector<StackedSample> test;
    for (const StackedSample& s : prep.split.test) if (is_dangerous(s.label)) test.push_back(s);
    std::vector<int> truth;
    for (const StackedSample& s : test) truth.push_back(dangerous_index(s.label));

    std::vector<int> pred;
    auto t0 = Clock::now();
    for (const StackedSample& s : test) {
      const auto p = ddb_probabilities(cnn.bundle, embed(cnn.bundle, s));
      pred.push_back(static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin()));
    }
    const double cnn_ms = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
    out.push_back({"fused-cnn", seed, compute_metrics(pred, truth, {}, kDangerousCount),
                   cnn_ms / static_cast<double>(test.size())});

    std::vector<std::vector<double>> x;
    std::vector<int> y;
    for (const StackedSample& s : prep.split.train) {
      if (!is_dangerous(s.label)) continue;
      x.push_back(rf::engineer_features(s));
      y.push_back(dangerous_index(s.label));
    }
    rf::ForestOptions fo = forest;
    fo.seed = seed;
    const rf::Forest model = rf::train_forest(x, y, fo);
    pred.clear();
    t0 = Clock::now();
    for (const StackedSample& s : test) pred.push_back(rf::predict_forest(model, rf::engineer_features(s)).label);
    const double rf_ms = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
    out.push_back({"random-forest", seed, compute_metrics(pred, truth, {}, kDangerousCount),
                   rf_ms / static_cast<double>(test.size())});
  }
  return out;
}

void write_comparison_csv(std::ostream& out, std::span<const ModelComparison> rows) {
  out << "model,seed,class,support,precision,recall,f1,accuracy,latency_ms\n" << std::setprecision(6);
  for (const ModelComparison& m : rows) {
    std::size_t total = 0;
    for (std::size_t c = 0; c < m.report.per_class.size(); ++c) {
      const ClassMetrics& k = m.report.per_class[c];
      total += k.support;
      out << m.model << ',' << m.seed << ',' << to_string(from_dangerous_index(static_cast<int>(c)))
          << ',' << k.support << ',' << k.precision << ',' << k.recall << ',' << k.f1 << ",,\n";
    }
    out << m.model << ',' << m.seed << ",weighted," << total << ",,," << m.report.weighted_f1 << ','
        << m.report.accuracy << ',' << m.latency_ms << '\n';
  }
}

void write_comparison_markdown(std::ostream& out, std::span<const ModelComparison> rows) {
  out << std::fixed << std::setprecision(4);
  out << "| model | seed | weighted F1 | accuracy | latency (ms/window) |\n";
  out << "|---|---|---|---|---|\n";
  for (const ModelComparison& m : rows) {
    out << "| " << m.model << " | " << m.seed << " | " << m.report.weighted_f1 << " | "
        << m.report.accuracy << " | " << m.latency_ms << " |\n";
  }
  out << "\n| class |";
  for (const ModelComparison& m : rows) out << ' ' << m.model << " #" << m.seed << " |";
  out << "\n|---|";
  for (std::size_t i = 0; i < rows.size(); ++i) out << "---|";
  out << '\n';
  for (int c = 0; c < kDangerousCount; ++c) {
    out << "| " << to_string(from_dangerous_index(c)) << " |";
    for (const ModelComparison& m : rows) out << ' ' << m.report.per_class.at(static_cast<std::size_t>(c)).f1 << " |";
    out << '\n';
  }
}

void write_metrics_json(std::ostream& out, const MetricsReport& report,
                        std::span<const std::string> class_names) {
  nlohmann::ordered_json j;
  j["classes"] = class_names;
  j["confusion"] = report.confusion;
  nlohmann::ordered_json per = nlohmann::ordered_json::array();
  for (std::size_t c = 0; c < report.per_class.size(); ++c) {
    const ClassMetrics& m = report.per_class[c];
    per.push_back({{"class", c < class_names.size() ? class_names[c] : std::to_string(c)},
                   {"support", m.support},
                   {"precision", m.precision},
                   {"recall", m.recall},
                   {"f1", m.f1}});
  }
  j["per_class"] = std::move(per);
  j["accuracy"] = report.accuracy;
  j["weighted_f1"] = report.weighted_f1;
  j["macro_f1"] = report.macro_f1;
  if (report.auc) {
    j["auc"] = *report.auc;
    nlohmann::ordered_json roc = nlohmann::ordered_json::array();
    for (const RocPoint& p : report.roc) roc.push_back({p.fpr, p.tpr});
    j["roc"] = std::move(roc);
  }
  out << j.dump(2) << '\n';
}

ForestSearchResult random_search_forest(std::span<const std::vector<double>> train_x,
                                        std::span<const int> train_y,
                                        std::span<const std::vector<double>> val_x,
                                        std::span<const int> val_y, int trials,
                                        const rf::ForestOptions& base) {
  if (trials < 1) throw InvalidArgument("random_search_forest: trials must be >= 1");
  if (val_x.size() != val_y.size() || val_x.empty()) {
    throw InvalidArgument("random_search_forest: validation set is empty or ragged");
  }
  const int width = static_cast<int>(train_x.empty() ? 0 : train_x.front().size());
  const int root = std::max(1, static_cast<int>(std::sqrt(static_cast<double>(width))));
  const int depths[] = {0, 6, 10, 16, 24};
  const int feats[] = {std::max(1, root / 2), root, std::min(width, 2 * root)};
  std::mt19937_64 rng(mix_seed(base.seed, 0xf0125));
  ForestSearchResult out;
  out.best = base;
  out.best_score = -1.0;
  for (int t = 0; t < trials; ++t) {
    rf::ForestOptions o = base;
    o.max_depth = depths[std::uniform_int_distribution<int>(0, 4)(rng)];
    o.max_features = feats[std::uniform_int_distribution<int>(0, 2)(rng)];
    const rf::Forest f = rf::train_forest(train_x, train_y, o);
    std::vector<int> pred;
    for (const auto& x : val_x) pred.push_back(rf::predict_forest(f, x).label);
    const double score = compute_metrics(pred, val_y).weighted_f1;
    out.trials.emplace_back(o, score);
    if (score > out.best_score) {
      out.best_score = score;
      out.best = o;
    }
  }
  return out;
}

}  // namespace mmdrive
