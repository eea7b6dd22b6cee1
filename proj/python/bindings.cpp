#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <algorithm>
#include <string>
#include <tuple>
#include <vector>

#include "mmdrive/activity.hpp"
#include "mmdrive/dataset_io.hpp"
#include "mmdrive/dsp.hpp"
#include "mmdrive/frame_parser.hpp"
#include "mmdrive/metrics.hpp"
#include "mmdrive/models.hpp"
#include "mmdrive/preprocess.hpp"
#include "mmdrive/radar_sim.hpp"
#include "mmdrive/script.hpp"

namespace py = pybind11;
using namespace mmdrive;

namespace {

py::dict frame_dict(const RadarFrame& f) {
  py::dict d;
  d["timestamp"] = f.timestamp;
  d["range_profile"] = f.range_profile;
  d["noise_profile"] = f.noise_profile;
  std::vector<std::vector<double>> rd;
  const std::size_t r = f.range_bins();
  for (std::size_t i = 0; i < f.doppler_bins(); ++i)
    rd.emplace_back(f.range_doppler.begin() + i * r, f.range_doppler.begin() + (i + 1) * r);
  d["range_doppler"] = rd;
  return d;
}

RadarFrame frame_from_dict(const py::dict& d) {
  RadarFrame f;
  f.timestamp = d["timestamp"].cast<double>();
  f.range_profile = d["range_profile"].cast<std::vector<double>>();
  f.noise_profile = d["noise_profile"].cast<std::vector<double>>();
  for (const auto& row : d["range_doppler"].cast<std::vector<std::vector<double>>>())
    f.range_doppler.insert(f.range_doppler.end(), row.begin(), row.end());
  return f;
}

py::dict simulate(const std::string& script_text, std::uint64_t seed, double snr_db,
                  std::vector<double> bumps) {
  const DriveScript script = parse_script_text(script_text);
  bumps.insert(bumps.end(), script.bumps.begin(), script.bumps.end());
  std::sort(bumps.begin(), bumps.end());
  RadarConfig cfg;
  cfg.snr_db = snr_db;
  cfg.validate();
  const DriveSimulator sim(script.segments, cfg, seed, bumps);
  py::list frames;
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < sim.frame_count(); ++i) {
    frames.append(frame_dict(extract_features(sim.cube(i), cfg, sim.frame_time(i))));
    labels.emplace_back(to_string(sim.label(i)));
  }
  std::vector<std::pair<double, double>> imu;
  for (const ImuSample& s : sim.imu()) imu.emplace_back(s.timestamp, s.accel_z);
  py::dict out;
  out["frames"] = frames;
  out["labels"] = labels;
  out["imu"] = imu;
  return out;
}

py::dict verdict_dict(const Verdict& v, double t) {
  py::dict d;
  d["t"] = t;
  d["verdict"] = std::string(to_string(v.kind));
  d["class"] = v.activity ? py::object(py::str(std::string(to_string(*v.activity)))) : py::object(py::none());
  d["dvn_score"] = v.dvn_score ? py::object(py::float_(*v.dvn_score)) : py::object(py::none());
  d["probs"] = v.class_probs.empty() ? py::object(py::none()) : py::object(py::cast(v.class_probs));
  return d;
}

class PyModel {
 public:
  explicit PyModel(const std::string& path) : bundle_(load_bundle(path)) {}

  int window() const { return bundle_.architecture.window; }

  py::dict infer(const py::list& frames_in, double threshold) {
    std::vector<RadarFrame> frames;
    for (const auto& f : frames_in) frames.push_back(frame_from_dict(f.cast<py::dict>()));
    const std::vector<Activity> labels(frames.size(), Activity::Normal);
    auto samples = stack_frames(frames, labels, {.window = window(), .stride = 1});
    apply_norm_inplace(samples, bundle_.norm_stats);
    InferenceCounters counters;
    py::list verdicts;
    const double period = RadarConfig{}.frame_period();
    for (const StackedSample& s : samples)
      verdicts.append(verdict_dict(infer_one(s, threshold, counters), s.window_start + period * (window() - 1)));
    py::dict out;
    out["verdicts"] = verdicts;
    out["windows"] = counters.windows;
    out["dvn_calls"] = counters.dvn_calls;
    out["ddb_calls"] = counters.ddb_calls;
    out["suppressed"] = counters.suppressed;
    return out;
  }

 private:
  Verdict infer_one(const StackedSample& s, double threshold, InferenceCounters& c) const {
    return mmdrive::infer(bundle_, s, threshold, false, c);
  }

  ModelBundle bundle_;
};

class PyDecoder {
 public:
  void feed(const py::bytes& data) {
    const std::string s = data;
    dec_.feed(std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
  }
  py::object next() {
    auto f = dec_.next();
    return f ? py::object(frame_dict(*f)) : py::object(py::none());
  }
  std::size_t frames_decoded() const { return dec_.frames_decoded(); }
  std::size_t corrupt_packets() const { return dec_.corrupt_packets(); }

 private:
  FrameDecoder dec_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "mmdrive core bindings";

  py::register_exception<ScriptError>(m, "ScriptError", PyExc_ValueError);

  m.def("activities", [] {
    std::vector<std::string> names;
    for (Activity a : all_activities()) names.emplace_back(to_string(a));
    return names;
  });

  m.def("parse_script", [](const std::string& text) {
    const DriveScript s = parse_script_text(text);
    std::vector<std::tuple<std::string, double, double>> segs;
    for (const auto& seg : s.segments) segs.emplace_back(std::string(to_string(seg.activity)), seg.start, seg.duration);
    return py::make_tuple(segs, s.bumps);
  });

  m.def("simulate", &simulate, py::arg("script"), py::arg("seed") = 1, py::arg("snr_db") = RadarConfig{}.snr_db,
        py::arg("bumps") = std::vector<double>{},
        "Render a drive script; returns frames (dicts), labels and (t, accel_z) IMU samples.");

  m.def("encode_frame", [](const py::dict& frame) {
    const auto bytes = encode_frame(frame_from_dict(frame));
    return py::bytes(reinterpret_cast<const char*>(bytes.data()), bytes.size());
  });
  m.def("db_to_q9", &db_to_q9);
  m.def("q9_to_db", &q9_to_db);

  py::class_<PyDecoder>(m, "FrameDecoder")
      .def(py::init<>())
      .def("feed", &PyDecoder::feed)
      .def("next", &PyDecoder::next)
      .def_property_readonly("frames_decoded", &PyDecoder::frames_decoded)
      .def_property_readonly("corrupt_packets", &PyDecoder::corrupt_packets);

  m.def("compute_metrics", [](const std::vector<int>& pred, const std::vector<int>& truth,
                              const std::vector<double>& scores, std::size_t classes) {
    const MetricsReport r = compute_metrics(pred, truth, scores, classes);
    py::dict d;
    d["accuracy"] = r.accuracy;
    d["weighted_f1"] = r.weighted_f1;
    d["macro_f1"] = r.macro_f1;
    d["confusion"] = r.confusion;
    d["auc"] = r.auc ? py::object(py::float_(*r.auc)) : py::object(py::none());
    return d;
  }, py::arg("predictions"), py::arg("truths"), py::arg("scores") = std::vector<double>{},
     py::arg("num_classes") = 0);
  m.def("roc_auc", [](const std::vector<int>& truths, const std::vector<double>& scores) {
    return roc_auc(truths, scores);
  });

  py::class_<PyModel>(m, "Model")
      .def(py::init<const std::string&>(), py::arg("path"))
      .def_property_readonly("window", &PyModel::window)
      .def("infer", &PyModel::infer, py::arg("frames"), py::arg("threshold") = 0.5,
           "Two-stage inference over consecutive frames; returns verdicts and counters.");
}
