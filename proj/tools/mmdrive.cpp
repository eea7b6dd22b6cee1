// mmdrive command-line tool.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstdlib>
#include <deque>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "mmdrive/baseline_rf.hpp"
#include "mmdrive/dataset_io.hpp"
#include "mmdrive/dsp.hpp"
#include "mmdrive/error.hpp"
#include "mmdrive/experiments.hpp"
#include "mmdrive/frame_parser.hpp"
#include "mmdrive/models.hpp"
#include "mmdrive/nn/serialization.hpp"
#include "mmdrive/preprocess.hpp"
#include "mmdrive/radar_sim.hpp"
#include "mmdrive/script.hpp"

namespace fs = std::filesystem;
using namespace mmdrive;
using ojson = nlohmann::ordered_json;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kRuntime = 3 };

// Bad input files or contents.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class LogLevel { Error = 0, Warn, Info, Debug };

LogLevel log_level() {
  static const LogLevel level = [] {
    const char* env = std::getenv("MMDRIVE_LOG");
    const std::string v = env ? env : "warn";
    if (v == "error" || v == "quiet") return LogLevel::Error;
    if (v == "info") return LogLevel::Info;
    if (v == "debug") return LogLevel::Debug;
    return LogLevel::Warn;
  }();
  return level;
}

void log(LogLevel level, const std::string& msg) {
  static constexpr const char* names[] = {"error", "warn", "info", "debug"};
  if (level <= log_level()) std::cerr << "mmdrive: " << names[static_cast<int>(level)] << ": " << msg << '\n';
}

void require_file(const std::string& path, const char* what) {
  if (path == "-") return;
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) throw DataError(std::string(what) + " not found: " + path);
}

void require_parent(const std::string& path) {
  if (path == "-") return;
  const fs::path parent = fs::path(path).parent_path();
  std::error_code ec;
  if (!parent.empty() && !fs::is_directory(parent, ec)) throw DataError("output directory does not exist: " + parent.string());
}

std::ifstream open_in(const std::string& path, std::ios::openmode mode = std::ios::in) {
  std::ifstream in(path, mode);
  if (!in) throw DataError("cannot open " + path);
  return in;
}

std::ofstream open_out(const std::string& path, std::ios::openmode mode = std::ios::out) {
  std::ofstream out(path, mode);
  if (!out) throw DataError("cannot write " + path);
  return out;
}

// A sidecar next to a dataset, used when present.
std::string default_imu_path(const std::string& data) { return data + ".imu.csv"; }

std::vector<ImuSample> load_imu(const std::string& explicit_path, const std::string& data_path) {
  std::string path = explicit_path;
  if (path.empty()) {
    path = default_imu_path(data_path);
    if (!fs::exists(path)) return {};
  }
  require_file(path, "IMU file");
  auto in = open_in(path);
  return read_imu_csv(in);
}

std::vector<DatasetRecord> load_records(const std::string& path) {
  require_file(path, "dataset");
  auto in = open_in(path);
  auto r = read_jsonl(in, JsonlMode::Strict);
  if (r.records.empty()) throw DataError("dataset " + path + " holds no records");
  return r.records;
}

// Shared training/evaluation knobs.
struct PipelineFlags {
  int epochs = 20;
  int dvn_epochs = 0;  // 0: same as epochs
  int batch = 32;
  double lr = 1e-3;
  int patience = 10;
  int window = kDefaultWindow;
  int stride = 1;
  int train_stride = 1;
  double dvn_threshold = 0.5;
  double bump_k = BumpDetectorOptions{}.k;
  bool no_gate = false;

  void add_to(CLI::App& app, bool with_training) {
    if (with_training) {
      app.add_option("--epochs", epochs, "maximum training epochs")->check(CLI::PositiveNumber);
      app.add_option("--dvn-epochs", dvn_epochs, "DVN head epochs (default: --epochs)")->check(CLI::PositiveNumber);
      app.add_option("--batch", batch, "minibatch size")->check(CLI::PositiveNumber);
      app.add_option("--lr", lr, "Adam learning rate")->check(CLI::PositiveNumber);
      app.add_option("--patience", patience, "early-stopping patience in epochs")->check(CLI::PositiveNumber);
      app.add_option("--train-stride", train_stride, "use every k-th training window")->check(CLI::PositiveNumber);
    }
    app.add_option("--window", window, "frames per stacked window")->check(CLI::Range(1, 64));
    app.add_option("--stride", stride, "window stride in frames")->check(CLI::PositiveNumber);
    app.add_option("--dvn-threshold", dvn_threshold, "DVN decision threshold")->check(CLI::Range(0.0, 1.0));
    app.add_option("--bump-k", bump_k, "bump detector threshold (robust sigmas)")->check(CLI::PositiveNumber);
    app.add_flag("--no-gate", no_gate, "keep bump-coincident frames");
  }

  PipelineConfig config(std::uint64_t seed) const {
    PipelineConfig c;
    c.window = window;
    c.stride = stride;
    c.train_stride = train_stride;
    c.gate_bumps = !no_gate;
    c.bump.k = bump_k;
    c.split.seed = seed;
    c.model_seed = seed;
    c.dvn_threshold = dvn_threshold;
    const bool verbose = log_level() >= LogLevel::Info;
    c.ddb = {.epochs = epochs, .batch = batch, .lr = lr, .patience = patience, .seed = seed, .verbose = verbose};
    c.dvn = c.ddb;
    if (dvn_epochs > 0) c.dvn.epochs = dvn_epochs;
    return c;
  }
};

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto dash = item.find('-');
    try {
      if (dash != std::string::npos && dash > 0) {
        const int a = std::stoi(item.substr(0, dash)), b = std::stoi(item.substr(dash + 1));
        if (a > b) throw UsageError("bad range '" + item + "'");
        for (int v = a; v <= b; ++v) out.push_back(v);
      } else {
        out.push_back(std::stoi(item));
      }
    } catch (const std::logic_error&) {
      throw UsageError("bad list item '" + item + "' in '" + text + "'");
    }
  }
  if (out.empty()) throw UsageError("empty list '" + text + "'");
  return out;
}

ojson verdict_json(const Verdict& v, double t) {
  ojson j;
  j["t"] = std::round(t * 1e6) / 1e6;
  j["verdict"] = std::string(to_string(v.kind));
  j["class"] = v.activity ? ojson(std::string(to_string(*v.activity))) : ojson(nullptr);
  j["dvn_score"] = v.dvn_score ? ojson(*v.dvn_score) : ojson(nullptr);
  j["probs"] = v.class_probs.empty() ? ojson(nullptr) : ojson(v.class_probs);
  return j;
}

bool window_hits_bump(const StackedSample& s, int window, double period, std::span<const Interval> bumps) {
  for (int k = 0; k < window; ++k) {
    if (in_any_interval(s.window_start + period * k, bumps)) return true;
  }
  return false;
}

// ------------------------------------------------------------- simulate

struct SimulateArgs {
  std::string script, out, imu_out;
  int segments_per_class = 0;
  double segment_duration = 8.0;
  double snr = RadarConfig{}.snr_db;
  std::vector<double> bumps;
};

int cmd_simulate(const SimulateArgs& a, std::uint64_t seed) {
  if (a.script.empty() == (a.segments_per_class == 0)) throw UsageError("simulate needs exactly one of --script or --segments-per-class");
  require_parent(a.out);
  RadarConfig cfg;
  cfg.snr_db = a.snr;
  cfg.validate();

  std::vector<ScriptSegment> segments;
  std::vector<double> bumps = a.bumps;
  if (!a.script.empty()) {
    require_file(a.script, "script");
    auto in = open_in(a.script);
    DriveScript script = parse_script(in);
    segments = std::move(script.segments);
    bumps.insert(bumps.end(), script.bumps.begin(), script.bumps.end());
  } else {
    SyntheticDatasetOptions o;
    o.segments_per_class = a.segments_per_class;
    o.segment_duration = a.segment_duration;
    o.seed = seed;
    o.config = cfg;
    segments = dataset_script(o);
  }
  std::sort(bumps.begin(), bumps.end());
  if (segments.empty()) throw DataError("script describes no segments");

  const DriveSimulator sim(segments, cfg, seed, bumps);
  const auto& imu = sim.imu();
  std::ofstream out = open_out(a.out);
  std::size_t imu_at = 0;
  for (std::size_t i = 0; i < sim.frame_count(); ++i) {
    const double t = sim.frame_time(i);
    while (imu_at + 1 < imu.size() && imu[imu_at + 1].timestamp <= t) ++imu_at;
    const double z = imu.empty() ? 0.0 : imu[imu_at].accel_z;
    const RadarFrame f = extract_features(sim.cube(i), cfg, t);
    out << record_to_json(DatasetRecord::from_frame(f, z, sim.label(i))) << '\n';
  }
  const std::string imu_path = a.imu_out.empty() ? default_imu_path(a.out) : a.imu_out;
  std::ofstream imu_out = open_out(imu_path);
  write_imu_csv(imu_out, imu);
  log(LogLevel::Info, "wrote " + std::to_string(sim.frame_count()) + " frames to " + a.out + " and IMU to " + imu_path);
  return kOk;
}

// --------------------------------------------------------- encode/parse

int cmd_encode(const std::string& in_path, const std::string& out_path) {
  const auto records = load_records(in_path);
  require_parent(out_path);
  std::ofstream file;
  std::ostream* out = &std::cout;
  if (out_path != "-") {
    file = open_out(out_path, std::ios::binary);
    out = &file;
  }
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto bytes = encode_frame(records[i].to_frame(i));
    out->write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  }
  out->flush();
  return kOk;
}

template <typename OnFrame>
void decode_stream(std::istream& in, FrameDecoder& dec, OnFrame&& on_frame) {
  std::vector<char> chunk(4096);
  std::size_t corrupt = 0;
  while (in) {
    in.read(chunk.data(), static_cast<std::streamsize>(chunk.size()));
    const auto n = static_cast<std::size_t>(in.gcount());
    if (n == 0) break;
    dec.feed(std::span(reinterpret_cast<const std::uint8_t*>(chunk.data()), n));
    while (auto f = dec.next()) {
      if (dec.corrupt_packets() != corrupt) {
        log(LogLevel::Warn, "skipped " + std::to_string(dec.corrupt_packets() - corrupt) + " corrupt packet(s)");
        corrupt = dec.corrupt_packets();
      }
      on_frame(std::move(*f));
    }
  }
  if (dec.corrupt_packets() != corrupt) log(LogLevel::Warn, "skipped corrupt packet(s) at end of stream");
}

int cmd_parse(const std::string& in_path, const std::string& out_path) {
  require_file(in_path, "stream");
  require_parent(out_path);
  std::ifstream file;
  std::istream* in = &std::cin;
  if (in_path != "-") {
    file = open_in(in_path, std::ios::binary);
    in = &file;
  }
  std::ofstream out = open_out(out_path);
  FrameDecoder dec;
  decode_stream(*in, dec, [&](RadarFrame f) {
    out << record_to_json(DatasetRecord::from_frame(f, 0.0, std::nullopt)) << '\n';
  });
  ojson report{{"frames", dec.frames_decoded()}, {"corrupt_packets", dec.corrupt_packets()},
               {"bytes_skipped", dec.bytes_skipped()}};
  std::cerr << report.dump() << '\n';
  return kOk;
}

// ----------------------------------------------------------- preprocess

int cmd_preprocess(const std::string& data, const std::string& imu_path, const std::string& out,
                   const std::string& features_out, const PipelineFlags& flags, std::uint64_t seed) {
  const auto records = load_records(data);
  const LabeledFrames lf = frames_from_records(records, load_imu(imu_path, data));
  if (!out.empty()) require_parent(out);
  if (!features_out.empty()) require_parent(features_out);
  const PreparedData p = prepare(lf, flags.config(seed));

  ojson summary;
  summary["frames"] = lf.frames.size();
  summary["gated_frames"] = p.gated_frames;
  summary["window"] = flags.window;
  summary["stride"] = flags.stride;
  auto counts = [](const std::vector<StackedSample>& v) {
    ojson c = ojson::object();
    for (Activity a : all_activities()) {
      const auto n = std::count_if(v.begin(), v.end(), [&](const StackedSample& s) { return s.label == a; });
      if (n) c[std::string(to_string(a))] = n;
    }
    return c;
  };
  summary["train"] = counts(p.split.train);
  summary["val"] = counts(p.split.val);
  summary["test"] = counts(p.split.test);
  summary["norm"] = {{"rn_min", p.norm.rn_min}, {"rn_max", p.norm.rn_max}, {"rd_min", p.norm.rd_min}, {"rd_max", p.norm.rd_max}};

  if (!features_out.empty()) {
    std::ofstream f = open_out(features_out);
    f << "split,label";
    for (std::size_t i = 0; i < rf::kFeaturesPerFrame * static_cast<std::size_t>(flags.window); ++i) f << ",f" << i;
    f << '\n' << std::setprecision(17);
    for (const auto& [name, set] : {std::pair{"train", &p.split.train}, {"val", &p.split.val}, {"test", &p.split.test}}) {
      for (const StackedSample& s : *set) {
        f << name << ',' << to_string(s.label);
        for (double v : rf::engineer_features(s)) f << ',' << v;
        f << '\n';
      }
    }
  }
  if (out.empty()) {
    std::cout << summary.dump(2) << '\n';
  } else {
    open_out(out) << summary.dump(2) << '\n';
  }
  return kOk;
}

// ---------------------------------------------------------------- train

int cmd_train(const std::string& data, const std::string& imu_path, const std::string& model,
              const std::string& history, const PipelineFlags& flags, std::uint64_t seed) {
  const auto records = load_records(data);
  const auto imu = load_imu(imu_path, data);
  require_parent(model);
  if (!history.empty()) require_parent(history);
  const LabeledFrames lf = frames_from_records(records, imu);
  PipelineResult r = run_pipeline(lf, flags.config(seed));
  save_bundle(r.bundle, model);

  const std::string hist_path = history.empty() ? model + ".history.csv" : history;
  std::ofstream h = open_out(hist_path);
  h << "stage,epoch,train_loss,val_score\n";
  for (const auto& [stage, hist] : {std::pair{"ddb", &r.ddb_history}, {"dvn", &r.dvn_history}}) {
    for (const EpochRecord& e : hist->epochs) {
      h << stage << ',' << e.epoch << ',' << e.train_loss << ',';
      if (e.val_score) h << *e.val_score;
      h << '\n';
    }
  }
  ojson summary{{"model", model},
                {"history", hist_path},
                {"gated_frames", r.gated_frames},
                {"ddb_test_weighted_f1", r.ddb_test.weighted_f1},
                {"ddb_test_accuracy", r.ddb_test.accuracy},
                {"dvn_test_auc", r.dvn_test.auc ? ojson(*r.dvn_test.auc) : ojson(nullptr)}};
  std::cout << summary.dump(2) << '\n';
  return kOk;
}

// ---------------------------------------------------------------- infer

struct InferArgs {
  std::string model, input, imu;
  bool stream = false;
  bool binary = false;
  double speed = 1.0;
};

bool looks_binary(const std::string& path) {
  if (path == "-") return false;
  std::ifstream in(path, std::ios::binary);
  std::array<char, 8> head{};
  in.read(head.data(), head.size());
  return in.gcount() == 8 && std::equal(head.begin(), head.end(), kTlvMagic.begin(),
                                        [](char a, std::uint8_t b) { return static_cast<std::uint8_t>(a) == b; });
}

std::vector<RadarFrame> read_frames(const std::string& path, bool binary) {
  std::vector<RadarFrame> frames;
  if (binary) {
    std::ifstream file;
    std::istream* in = &std::cin;
    if (path != "-") {
      file = open_in(path, std::ios::binary);
      in = &file;
    }
    FrameDecoder dec;
    decode_stream(*in, dec, [&](RadarFrame f) { frames.push_back(std::move(f)); });
  } else {
    std::ifstream file;
    std::istream* in = &std::cin;
    if (path != "-") {
      file = open_in(path);
      in = &file;
    }
    const auto r = read_jsonl(*in, JsonlMode::Strict);
    for (std::size_t i = 0; i < r.records.size(); ++i) frames.push_back(r.records[i].to_frame(i));
  }
  return frames;
}

ojson counters_json(const InferenceCounters& c) {
  return {{"windows", c.windows}, {"suppressed", c.suppressed}, {"dvn_calls", c.dvn_calls}, {"ddb_calls", c.ddb_calls}};
}

int infer_batch(const ModelBundle& b, const InferArgs& a, double threshold, std::span<const Interval> bumps) {
  const auto frames = read_frames(a.input, a.binary);
  const int window = b.architecture.window;
  const std::vector<Activity> labels(frames.size(), Activity::Normal);
  auto samples = stack_frames(frames, labels, {.window = window, .stride = 1});
  apply_norm_inplace(samples, b.norm_stats);
  InferenceCounters counters;
  const double period = RadarConfig{}.frame_period();
  for (const StackedSample& s : samples) {
    const Verdict v = infer(b, s, threshold, window_hits_bump(s, window, period, bumps), counters);
    std::cout << verdict_json(v, s.window_start + period * (window - 1)).dump() << '\n';
  }
  ojson report = counters_json(counters);
  report["frames"] = frames.size();
  std::cerr << report.dump() << '\n';
  return kOk;
}

// Fixed-capacity FIFO; a push into a full queue evicts the oldest frame.
class FrameQueue {
 public:
  explicit FrameQueue(std::size_t capacity) : capacity_(capacity) {}

  void push(RadarFrame f) {
    {
      std::lock_guard lock(mu_);
      if (q_.size() == capacity_) {
        q_.pop_front();
        ++dropped_;
      }
      q_.push_back(std::move(f));
    }
    cv_.notify_one();
  }

  void close() {
    {
      std::lock_guard lock(mu_);
      closed_ = true;
    }
    cv_.notify_all();
  }

  std::optional<RadarFrame> pop() {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return !q_.empty() || closed_; });
    if (q_.empty()) return std::nullopt;
    RadarFrame f = std::move(q_.front());
    q_.pop_front();
    return f;
  }

  std::size_t dropped() const {
    std::lock_guard lock(mu_);
    return dropped_;
  }

 private:
  const std::size_t capacity_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<RadarFrame> q_;
  std::size_t dropped_ = 0;
  bool closed_ = false;
};

constexpr std::size_t kQueueDepth = 16;
constexpr double kDeadlineMs = 200.0;

int infer_stream(const ModelBundle& b, const InferArgs& a, double threshold, std::span<const Interval> bumps) {
  using Clock = std::chrono::steady_clock;
  FrameQueue queue(kQueueDepth);
  std::exception_ptr ingest_error;
  std::atomic<std::size_t> ingested{0};

  std::thread ingest([&] {
    try {
      std::optional<double> first_ts;
      const auto start = Clock::now();
      auto pace = [&](const RadarFrame& f) {
        if (a.speed <= 0.0) return;
        if (!first_ts) first_ts = f.timestamp;
        const auto due = start + std::chrono::duration_cast<Clock::duration>(
                                     std::chrono::duration<double>((f.timestamp - *first_ts) / a.speed));
        std::this_thread::sleep_until(due);
      };
      auto emit = [&](RadarFrame f) {
        pace(f);
        ++ingested;
        queue.push(std::move(f));
      };
      std::ifstream file;
      std::istream* in = &std::cin;
      if (a.input != "-") {
        file.open(a.input, a.binary ? std::ios::binary : std::ios::in);
        if (!file) throw DataError("cannot open " + a.input);
        in = &file;
      }
      if (a.binary) {
        FrameDecoder dec;
        decode_stream(*in, dec, emit);
      } else {
        std::string line;
        std::size_t lineno = 0, index = 0;
        while (std::getline(*in, line)) {
          ++lineno;
          if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
          try {
            emit(record_from_json(line).to_frame(index++));
          } catch (const JsonlError& e) {
            log(LogLevel::Warn, "line " + std::to_string(lineno) + ": " + e.what());
          }
        }
      }
    } catch (...) {
      ingest_error = std::current_exception();
    }
    queue.close();
  });

  const int window = b.architecture.window;
  const double period = RadarConfig{}.frame_period();
  std::deque<RadarFrame> recent;
  InferenceCounters counters;
  std::size_t deadline_misses = 0;
  double worst_ms = 0.0;
  while (auto f = queue.pop()) {
    const auto t0 = Clock::now();
    if (!recent.empty() && f->timestamp - recent.back().timestamp > 1.5 * period) recent.clear();
    recent.push_back(std::move(*f));
    if (recent.size() > static_cast<std::size_t>(window)) recent.pop_front();
    if (recent.size() < static_cast<std::size_t>(window)) continue;
    const std::vector<RadarFrame> frames(recent.begin(), recent.end());
    const std::vector<Activity> labels(frames.size(), Activity::Normal);
    StackedSample s = stack_frames(frames, labels, {.window = window, .stride = 1}).at(0);
    s = apply_norm(std::move(s), b.norm_stats);
    const Verdict v = infer(b, s, threshold, window_hits_bump(s, window, period, bumps), counters);
    std::cout << verdict_json(v, frames.back().timestamp).dump() << std::endl;
    const double ms = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
    worst_ms = std::max(worst_ms, ms);
    if (ms > kDeadlineMs) ++deadline_misses;
  }
  ingest.join();
  if (queue.dropped()) log(LogLevel::Warn, "dropped " + std::to_string(queue.dropped()) + " frame(s) on a full queue");
  ojson report = counters_json(counters);
  report["frames"] = ingested.load();
  report["dropped_frames"] = queue.dropped();
  report["deadline_misses"] = deadline_misses;
  report["max_latency_ms"] = worst_ms;
  std::cerr << report.dump() << '\n';
  if (ingest_error) std::rethrow_exception(ingest_error);
  return kOk;
}

int cmd_infer(InferArgs a, double threshold, double bump_k) {
  require_file(a.model, "model");
  require_file(a.input, "input");
  if (!a.imu.empty()) require_file(a.imu, "IMU file");
  a.binary = a.binary || looks_binary(a.input);
  const ModelBundle b = load_bundle(a.model);
  std::vector<Interval> bumps;
  if (!a.imu.empty()) {
    auto in = open_in(a.imu);
    const auto imu = read_imu_csv(in);
    BumpDetectorOptions o;
    o.k = bump_k;
    bumps = detect_bumps(imu, o);
  }
  return a.stream ? infer_stream(b, a, threshold, bumps) : infer_batch(b, a, threshold, bumps);
}

// ----------------------------------------------------------------- eval

std::vector<StackedSample> eval_windows(const ModelBundle& b, const LabeledFrames& lf, const PipelineFlags& flags) {
  std::vector<RadarFrame> frames = lf.frames;
  std::vector<Activity> labels = lf.labels;
  std::vector<int> segments = lf.segments;
  if (!flags.no_gate && !lf.imu.empty()) {
    BumpDetectorOptions o;
    o.k = flags.bump_k;
    const auto keep = gate_mask(frames, detect_bumps(lf.imu, o));
    std::size_t w = 0;
    for (std::size_t i = 0; i < frames.size(); ++i) {
      if (!keep[i]) continue;
      if (w != i) frames[w] = std::move(frames[i]);
      labels[w] = labels[i];
      segments[w] = segments[i];
      ++w;
    }
    frames.resize(w);
    labels.resize(w);
    segments.resize(w);
  }
  auto samples = stack_frames(frames, labels, {.window = b.architecture.window, .stride = flags.stride}, segments);
  apply_norm_inplace(samples, b.norm_stats);
  return samples;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (!fs::is_directory(dir)) throw DataError("cannot create report directory " + dir);
}

int cmd_eval(const std::string& model, const std::string& data, const std::string& imu_path,
             const std::string& report_dir, const PipelineFlags& flags) {
  require_file(model, "model");
  const auto records = load_records(data);
  const auto imu = load_imu(imu_path, data);
  ensure_dir(report_dir);
  const ModelBundle b = load_bundle(model);
  const auto samples = eval_windows(b, frames_from_records(records, imu), flags);
  if (samples.empty()) throw DataError("dataset yields no windows");

  const MetricsReport dvn = evaluate_dvn(b, samples, flags.dvn_threshold);
  const auto ddb_classes = ModelBundle::ddb_classes();
  {
    std::ofstream out = open_out(report_dir + "/dvn_metrics.json");
    const std::vector<std::string> names{"normal", "dangerous"};
    write_metrics_json(out, dvn, names);
  }
  ojson summary{{"windows", samples.size()}, {"dvn_auc", dvn.auc ? ojson(*dvn.auc) : ojson(nullptr)},
                {"dvn_accuracy", dvn.accuracy}};
  const bool any_dangerous = std::any_of(samples.begin(), samples.end(), [](const StackedSample& s) { return is_dangerous(s.label); });
  if (any_dangerous) {
    const MetricsReport ddb = evaluate_ddb(b, samples);
    std::ofstream out = open_out(report_dir + "/ddb_metrics.json");
    write_metrics_json(out, ddb, ddb_classes);
    summary["ddb_weighted_f1"] = ddb.weighted_f1;
    summary["ddb_accuracy"] = ddb.accuracy;
  }
  std::cout << summary.dump(2) << '\n';
  return kOk;
}

// ---------------------------------------------------------- sweep/compare

int cmd_sweep(const std::string& data, const std::string& imu_path, const std::string& windows_text,
              const std::string& report_dir, const PipelineFlags& flags, std::uint64_t seed) {
  const auto windows = parse_int_list(windows_text);
  for (int w : windows)
    if (w < 1) throw UsageError("window sizes must be positive");
  const auto records = load_records(data);
  const auto imu = load_imu(imu_path, data);
  ensure_dir(report_dir);
  const auto rows = frame_stack_sweep(frames_from_records(records, imu), windows, flags.config(seed));
  std::ofstream out = open_out(report_dir + "/sweep.csv");
  write_sweep_csv(out, rows);
  write_sweep_csv(std::cout, rows);
  std::cout << "best window: " << best_window(rows) << '\n';
  return kOk;
}

int cmd_compare(const std::string& data, const std::string& imu_path, const std::string& seeds_text,
                const std::string& report_dir, int estimators, const PipelineFlags& flags) {
  std::vector<std::uint64_t> seeds;
  for (int s : parse_int_list(seeds_text)) seeds.push_back(static_cast<std::uint64_t>(s));
  const auto records = load_records(data);
  const auto imu = load_imu(imu_path, data);
  ensure_dir(report_dir);
  const auto rows = compare_models(frames_from_records(records, imu), seeds, flags.config(seeds.front()),
                                   {.n_estimators = estimators});
  {
    std::ofstream out = open_out(report_dir + "/comparison.csv");
    write_comparison_csv(out, rows);
  }
  {
    std::ofstream out = open_out(report_dir + "/comparison.md");
    write_comparison_markdown(out, rows);
  }
  write_comparison_markdown(std::cout, rows);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mmdrive: FMCW radar driver-activity toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "read options from a TOML/INI file");
  app.allow_config_extras(false);
  std::uint64_t seed = 1;
  app.add_option("--seed", seed, "seed for simulation, splits and initialization");

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "synthesize a labelled drive as JSONL plus an IMU sidecar");
  simulate->add_option("--script", sim.script, "drive script");
  simulate->add_option("--segments-per-class", sim.segments_per_class, "generate a shuffled dataset instead of a script")
      ->check(CLI::PositiveNumber);
  simulate->add_option("--segment-duration", sim.segment_duration, "seconds per generated segment")->check(CLI::PositiveNumber);
  simulate->add_option("--out", sim.out, "output JSONL")->required();
  simulate->add_option("--imu-out", sim.imu_out, "IMU CSV (default <out>.imu.csv)");
  simulate->add_option("--snr", sim.snr, "per-sample SNR in dB");
  simulate->add_option("--bump", sim.bumps, "extra bump time in seconds (repeatable)");

  std::string in_path, out_path, data, imu, model, history, report_dir, features;
  auto* encode = app.add_subcommand("encode", "convert JSONL records to a TLV byte stream");
  encode->add_option("--in", in_path, "input JSONL")->required();
  encode->add_option("--out", out_path, "output stream ('-' for stdout)")->required();

  auto* parse = app.add_subcommand("parse", "decode a TLV byte stream into JSONL records");
  parse->add_option("--in", in_path, "input stream ('-' for stdin)")->required();
  parse->add_option("--out", out_path, "output JSONL")->required();

  PipelineFlags flags;
  auto* preprocess = app.add_subcommand("preprocess", "gate, stack, split and normalize; print a summary");
  preprocess->add_option("--data", data, "dataset JSONL")->required();
  preprocess->add_option("--imu", imu, "IMU CSV (default <data>.imu.csv if present)");
  preprocess->add_option("--out", out_path, "summary JSON (default stdout)");
  preprocess->add_option("--features", features, "write random-forest features as CSV");
  flags.add_to(*preprocess, false);

  auto* train = app.add_subcommand("train", "train the fused model and save a bundle");
  train->add_option("--data", data, "dataset JSONL")->required();
  train->add_option("--imu", imu, "IMU CSV (default <data>.imu.csv if present)");
  train->add_option("--out", model, "model file")->required();
  train->add_option("--history", history, "per-epoch CSV (default <out>.history.csv)");
  flags.add_to(*train, true);

  InferArgs ia;
  auto* inf = app.add_subcommand("infer", "run two-stage inference and print verdict JSONL");
  inf->add_option("--model", ia.model, "model file")->required();
  inf->add_option("--in", ia.input, "JSONL or TLV stream ('-' for stdin)")->required();
  inf->add_option("--imu", ia.imu, "IMU CSV used to suppress bump windows");
  inf->add_flag("--stream", ia.stream, "process frames as they arrive through a bounded queue");
  inf->add_flag("--binary", ia.binary, "treat the input as a TLV stream (auto-detected for files)");
  inf->add_option("--speed", ia.speed, "stream pacing relative to frame timestamps, 0 = unpaced");
  flags.add_to(*inf, false);

  auto* eval = app.add_subcommand("eval", "evaluate a saved model on a labelled dataset");
  eval->add_option("--model", model, "model file")->required();
  eval->add_option("--data", data, "dataset JSONL")->required();
  eval->add_option("--imu", imu, "IMU CSV (default <data>.imu.csv if present)");
  eval->add_option("--report-dir", report_dir, "directory for metric reports")->required();
  flags.add_to(*eval, false);

  std::string windows = "1-16", seeds = "1,2,3";
  auto* sweep = app.add_subcommand("sweep", "retrain and score each window size");
  sweep->add_option("--data", data, "dataset JSONL")->required();
  sweep->add_option("--imu", imu, "IMU CSV (default <data>.imu.csv if present)");
  sweep->add_option("--windows", windows, "window sizes, e.g. 1-16 or 1,5,10");
  sweep->add_option("--report-dir", report_dir, "directory for sweep.csv")->required();
  flags.add_to(*sweep, true);

  int estimators = rf::ForestOptions{}.n_estimators;
  auto* compare = app.add_subcommand("compare", "fused model vs random forest over several seeds");
  compare->add_option("--data", data, "dataset JSONL")->required();
  compare->add_option("--imu", imu, "IMU CSV (default <data>.imu.csv if present)");
  compare->add_option("--seeds", seeds, "seeds, e.g. 1,2,3");
  compare->add_option("--estimators", estimators, "trees in the forest")->check(CLI::PositiveNumber);
  compare->add_option("--report-dir", report_dir, "directory for comparison.csv/.md")->required();
  flags.add_to(*compare, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*simulate) return cmd_simulate(sim, seed);
    if (*encode) return cmd_encode(in_path, out_path);
    if (*parse) return cmd_parse(in_path, out_path);
    if (*preprocess) return cmd_preprocess(data, imu, out_path, features, flags, seed);
    if (*train) return cmd_train(data, imu, model, history, flags, seed);
    if (*inf) return cmd_infer(ia, flags.dvn_threshold, flags.bump_k);
    if (*eval) return cmd_eval(model, data, imu, report_dir, flags);
    if (*sweep) {
      if (train->count("--epochs") == 0 && sweep->count("--epochs") == 0) flags.epochs = 20;
      return cmd_sweep(data, imu, windows, report_dir, flags, seed);
    }
    if (*compare) return cmd_compare(data, imu, seeds, report_dir, estimators, flags);
  } catch (const UsageError& e) {
    log(LogLevel::Error, e.what());
    return kUsage;
  } catch (const ScriptError& e) {
    log(LogLevel::Error, e.what());
    return kData;
  } catch (const JsonlError& e) {
    log(LogLevel::Error, e.what());
    return kData;
  } catch (const nn::ModelFormatError& e) {
    log(LogLevel::Error, e.what());
    return kData;
  } catch (const DataError& e) {
    log(LogLevel::Error, e.what());
    return kData;
  } catch (const InvalidArgument& e) {
    log(LogLevel::Error, e.what());
    return kData;
  } catch (const std::exception& e) {
    log(LogLevel::Error, e.what());
    return kRuntime;
  }
  return kUsage;
}
