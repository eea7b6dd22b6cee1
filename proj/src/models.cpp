#include "mmdrive/models.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>
#include <random>

#include "mmdrive/error.hpp"
#include "mmdrive/metrics.hpp"
#include "mmdrive/nn/optimizer.hpp"
#include "mmdrive/nn/serialization.hpp"
#include "mmdrive/radar_sim.hpp"

namespace mmdrive {

using nn::Network;
using nn::Padding;

void Architecture::validate() const {
  if (window < 1) throw InvalidArgument("architecture: window must be >= 1");
  if (rn_channels.size() != 3) throw InvalidArgument("architecture: rn branch needs 3 conv widths");
  if (rd_channels.size() != 4) throw InvalidArgument("architecture: rd branch needs 4 conv widths");
  // Three valid convolutions of height 3 remove 6 rows.
  if (range_bins < 7) throw InvalidArgument("architecture: range_bins must be >= 7");
  if (doppler_bins < 1) throw InvalidArgument("architecture: doppler_bins must be >= 1");
  for (int c : rn_channels) if (c < 1) throw InvalidArgument("architecture: channel count < 1");
  for (int c : rd_channels) if (c < 1) throw InvalidArgument("architecture: channel count < 1");
  if (hidden < 1) throw InvalidArgument("architecture: hidden width < 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw InvalidArgument("architecture: dropout outside [0, 1)");
}

nlohmann::json Architecture::to_json() const {
  return {{"window", window},           {"range_bins", range_bins},
          {"doppler_bins", doppler_bins}, {"rn_channels", rn_channels},
          {"rd_channels", rd_channels},   {"hidden", hidden},
          {"dropout", dropout}};
}

Architecture Architecture::from_json(const nlohmann::json& j) {
  Architecture a;
  a.window = j.at("window").get<int>();
  a.range_bins = j.at("range_bins").get<int>();
  a.doppler_bins = j.at("doppler_bins").get<int>();
  a.rn_channels = j.at("rn_channels").get<std::vector<int>>();
  a.rd_channels = j.at("rd_channels").get<std::vector<int>>();
  a.hidden = j.at("hidden").get<int>();
  a.dropout = j.at("dropout").get<double>();
  a.validate();
  return a;
}

namespace {

std::size_t sz(int v) { return static_cast<std::size_t>(v); }

Network build_head(const Architecture& arch, const std::string& name, int outputs, bool stop) {
  Network net(name, {arch.embedding()});
  if (stop) net.emplace<nn::GradientStop>();
  net.emplace<nn::Dropout>(arch.dropout);
  net.emplace<nn::Dense>(static_cast<int>(arch.embedding()), arch.hidden);
  net.emplace<nn::ReLU>();
  net.emplace<nn::Dropout>(arch.dropout);
  net.emplace<nn::Dense>(arch.hidden, outputs);
  if (outputs == 1) net.emplace<nn::Sigmoid>(); else net.emplace<nn::Softmax>();
  return net;
}

Tensor concat(const Tensor& a, const Tensor& b) {
  Tensor out({a.size() + b.size()});
  std::copy(b.storage().begin(), b.storage().end(),
            std::copy(a.storage().begin(), a.storage().end(), out.storage().begin()));
  return out;
}

std::vector<Network*> trainable(ModelBundle& b) {
  return {&b.fe_rn_branch, &b.fe_rd_branch, &b.ddb_head};
}

void add_into(std::vector<Tensor>& acc, const std::vector<Tensor>& g) {
  for (std::size_t i = 0; i < g.size(); ++i) {
    double* dst = acc[i].data();
    const double* src = g[i].data();
    for (std::size_t k = 0; k < g[i].size(); ++k) dst[k] += src[k];
  }
}

void scale(std::vector<Tensor>& acc, double f) {
  for (Tensor& t : acc) for (double& x : t.values()) x *= f;
}

void check_sample(const ModelBundle& b, const StackedSample& s, std::string_view where) {
  if (s.rn.shape() != b.fe_rn_branch.input_shape() || s.rd.shape() != b.fe_rd_branch.input_shape()) {
    throw InvalidArgument(std::string(where) + ": sample shapes " + shape_to_string(s.rn.shape()) +
                          " / " + shape_to_string(s.rd.shape()) + " do not match model inputs " +
                          shape_to_string(b.fe_rn_branch.input_shape()) + " / " +
                          shape_to_string(b.fe_rd_branch.input_shape()));
  }
}

std::size_t argmax(std::span<const double> v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

double ddb_val_score(const ModelBundle& b, std::span<const StackedSample> val) {
  std::vector<int> pred, truth;
  for (const StackedSample& s : val) {
    pred.push_back(static_cast<int>(argmax(ddb_probabilities(b, embed(b, s)))));
    truth.push_back(dangerous_index(s.label));
  }
  return compute_metrics(pred, truth, {}, kDangerousCount).weighted_f1;
}

std::optional<double> dvn_val_score(const ModelBundle& b, std::span<const Tensor> emb,
                                    std::span<const int> truth) {
  const auto pos = std::count(truth.begin(), truth.end(), 1);
  if (pos == 0 || static_cast<std::size_t>(pos) == truth.size()) return std::nullopt;
  std::vector<double> scores;
  for (const Tensor& e : emb) scores.push_back(dvn_score(b, e));
  return roc_auc(truth, scores);
}

// Early stopping bookkeeping shared by both trainers.
struct Stopper {
  int patience;
  double target;
  double best = -1.0;
  int best_epoch = 0;
  int stale = 0;

  // Returns true when the epoch is a new best.
  bool update(int epoch, double score) {
    if (score > best) {
      best = score;
      best_epoch = epoch;
      stale = 0;
      return true;
    }
    ++stale;
    return false;
  }
  bool done() const { return best >= target || stale >= patience; }
};

void check_options(const TrainOptions& o, std::string_view where) {
  if (o.epochs < 1) throw InvalidArgument(std::string(where) + ": epochs must be >= 1");
  if (o.batch < 1) throw InvalidArgument(std::string(where) + ": batch must be >= 1");
  if (!(o.lr > 0.0) || !std::isfinite(o.lr)) throw InvalidArgument(std::string(where) + ": lr must be > 0");
  if (o.patience < 1) throw InvalidArgument(std::string(where) + ": patience must be >= 1");
}

}  // namespace

Network build_rn_branch(const Architecture& arch) {
  arch.validate();
  Network net("fe_rn", {sz(arch.range_bins), 2, sz(arch.window)});
  const auto& c = arch.rn_channels;
  net.emplace<nn::Conv2D>(3, 2, arch.window, c[0], Padding::Valid).emplace<nn::ReLU>();
  net.emplace<nn::Conv2D>(3, 1, c[0], c[1], Padding::Valid).emplace<nn::ReLU>();
  net.emplace<nn::Conv2D>(3, 1, c[1], c[2], Padding::Valid).emplace<nn::ReLU>();
  net.emplace<nn::GlobalAvgPool>();
  return net;
}

Network build_rd_branch(const Architecture& arch) {
  arch.validate();
  Network net("fe_rd", {sz(arch.doppler_bins), sz(arch.range_bins), sz(arch.window)});
  int in = arch.window;
  for (int out : arch.rd_channels) {
    net.emplace<nn::Conv2D>(3, 3, in, out, Padding::Same).emplace<nn::ReLU>();
    in = out;
  }
  net.emplace<nn::GlobalAvgPool>();
  return net;
}

Network build_ddb_head(const Architecture& arch) {
  arch.validate();
  return build_head(arch, "ddb_head", kDangerousCount, false);
}

Network build_dvn_head(const Architecture& arch) {
  arch.validate();
  return build_head(arch, "dvn_head", 1, true);
}

std::vector<std::string> ModelBundle::ddb_classes() {
  std::vector<std::string> out;
  for (int i = 0; i < kDangerousCount; ++i) out.emplace_back(to_string(from_dangerous_index(i)));
  return out;
}

ModelBundle build_bundle(std::uint64_t seed, const Architecture& arch) {
  ModelBundle b{build_rn_branch(arch), build_rd_branch(arch), build_ddb_head(arch),
                build_dvn_head(arch), NormStats{}, seed, arch};
  b.fe_rn_branch.initialize(mix_seed(seed, 1));
  b.fe_rd_branch.initialize(mix_seed(seed, 2));
  b.ddb_head.initialize(mix_seed(seed, 3));
  b.dvn_head.initialize(mix_seed(seed, 4));
  return b;
}

Tensor embed(const ModelBundle& bundle, const StackedSample& sample) {
  check_sample(bundle, sample, "embed");
  return concat(bundle.fe_rn_branch.predict(sample.rn), bundle.fe_rd_branch.predict(sample.rd));
}

std::vector<double> ddb_probabilities(const ModelBundle& bundle, const Tensor& embedding) {
  return bundle.ddb_head.predict(embedding).to_vector();
}

double dvn_score(const ModelBundle& bundle, const Tensor& embedding) {
  return bundle.dvn_head.predict(embedding)[0];
}

TrainHistory train_ddb(ModelBundle& bundle, std::span<const StackedSample> train,
                       std::span<const StackedSample> val, const TrainOptions& options) {
  check_options(options, "train_ddb");
  std::vector<bool> seen(kDangerousCount, false);
  for (std::span<const StackedSample> set : {train, val}) {
    for (const StackedSample& s : set) {
      if (!is_dangerous(s.label)) {
        throw InvalidArgument("train_ddb: Normal samples are not valid DDB training data");
      }
      check_sample(bundle, s, "train_ddb");
    }
  }
  for (const StackedSample& s : train) seen[sz(dangerous_index(s.label))] = true;
  std::string missing;
  for (int i = 0; i < kDangerousCount; ++i) {
    if (!seen[sz(i)]) missing += (missing.empty() ? "" : ", ") + std::string(to_string(from_dangerous_index(i)));
  }
  if (!missing.empty()) throw InvalidArgument("train_ddb: no training samples for " + missing);

  Network& rn = bundle.fe_rn_branch;
  Network& rd = bundle.fe_rd_branch;
  Network& head = bundle.ddb_head;
  const std::size_t rn_len = rn.output_shape()[0];
  const std::size_t logits_end = head.size() - 1;  // gradient enters below the softmax

  nn::Adam adam({.lr = options.lr});
  TrainHistory history;
  Stopper stop{options.patience, options.target_score};
  std::optional<ModelBundle> best;
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 1; epoch <= options.epochs; ++epoch) {
    std::mt19937_64 rng(mix_seed(options.seed, static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;

    for (std::size_t start = 0; start < order.size(); start += sz(options.batch)) {
      const std::size_t stop_at = std::min(order.size(), start + sz(options.batch));
      std::vector<Tensor> g_rn = rn.zero_gradients().params;
      std::vector<Tensor> g_rd = rd.zero_gradients().params;
      std::vector<Tensor> g_head = head.zero_gradients().params;

      for (std::size_t k = start; k < stop_at; ++k) {
        const StackedSample& s = train[order[k]];
        const std::uint64_t key = mix_seed(mix_seed(options.seed, static_cast<std::uint64_t>(epoch)), k);
        const auto p_rn = rn.forward(s.rn, nn::Mode::Train, key);
        const auto p_rd = rd.forward(s.rd, nn::Mode::Train, key + 1);
        const auto p_head = head.forward(concat(p_rn.output, p_rd.output), nn::Mode::Train, key + 2);
        const auto lg = nn::cross_entropy(p_head.output, sz(dangerous_index(s.label)));
        loss_sum += lg.loss;

        auto gh = head.backward(p_head, lg.grad, logits_end, true);
        const auto& gi = gh.input.storage();
        const auto mid = gi.begin() + static_cast<std::ptrdiff_t>(rn_len);
        Tensor up_rn({rn_len}, std::vector<double>(gi.begin(), mid));
        Tensor up_rd({gi.size() - rn_len}, std::vector<double>(mid, gi.end()));
        add_into(g_head, gh.params);
        add_into(g_rn, rn.backward(p_rn, up_rn).params);
        add_into(g_rd, rd.backward(p_rd, up_rd).params);
      }

      const double f = 1.0 / static_cast<double>(stop_at - start);
      std::vector<nn::Parameter*> params;
      std::vector<Tensor> grads;
      for (auto* pair : {&g_rn, &g_rd, &g_head}) scale(*pair, f);
      for (Network* net : trainable(bundle)) {
        for (nn::Parameter* p : net->parameter_list()) params.push_back(p);
      }
      for (auto* g : {&g_rn, &g_rd, &g_head}) {
        for (Tensor& t : *g) grads.push_back(std::move(t));
      }
      adam.step(params, grads);
    }

    EpochRecord rec{epoch, loss_sum / static_cast<double>(train.size()), std::nullopt};
    if (!val.empty()) rec.val_score = ddb_val_score(bundle, val);
    history.epochs.push_back(rec);
    if (options.verbose) {
      std::cerr << "ddb epoch " << epoch << " loss " << rec.train_loss;
      if (rec.val_score) std::cerr << " val_f1 " << *rec.val_score;
      std::cerr << '\n';
    }
    if (!rec.val_score) continue;
    if (stop.update(epoch, *rec.val_score)) best = bundle;
    if (stop.done()) break;
  }

  if (best) {
    bundle.fe_rn_branch = best->fe_rn_branch;
    bundle.fe_rd_branch = best->fe_rd_branch;
    bundle.ddb_head = best->ddb_head;
    history.best_epoch = stop.best_epoch;
    history.best_score = stop.best;
  } else {
    history.best_epoch = history.epochs.back().epoch;
  }
  bundle.fe_trained = true;
  bundle.training["ddb"] = {{"epochs_run", history.epochs.size()},
                            {"best_epoch", history.best_epoch},
                            {"batch", options.batch},
                            {"lr", options.lr},
                            {"seed", options.seed}};
  return history;
}

TrainHistory train_dvn(ModelBundle& bundle, std::span<const StackedSample> train,
                       std::span<const StackedSample> val, const TrainOptions& options) {
  if (!bundle.fe_trained) throw InvalidState("train_dvn: the FE network has not been trained");
  check_options(options, "train_dvn");
  std::size_t positives = 0;
  for (const StackedSample& s : train) positives += is_dangerous(s.label) ? 1 : 0;
  if (positives == 0) throw InvalidArgument("train_dvn: training set has no dangerous samples");
  if (positives == train.size()) throw InvalidArgument("train_dvn: training set has no Normal samples");

  // The FE is frozen, so every embedding can be computed once.
  auto cache = [&](std::span<const StackedSample> set, std::vector<Tensor>& emb, std::vector<int>& y) {
    for (const StackedSample& s : set) {
      emb.push_back(embed(bundle, s));
      y.push_back(is_dangerous(s.label) ? 1 : 0);
    }
  };
  std::vector<Tensor> tr_emb, va_emb;
  std::vector<int> tr_y, va_y;
  cache(train, tr_emb, tr_y);
  cache(val, va_emb, va_y);

  const auto n = static_cast<double>(train.size());
  const double w_pos = n / (2.0 * static_cast<double>(positives));
  const double w_neg = n / (2.0 * (n - static_cast<double>(positives)));

  Network& head = bundle.dvn_head;
  const std::size_t logit_end = head.size() - 1;
  nn::Adam adam({.lr = options.lr});
  TrainHistory history;
  Stopper stop{options.patience, options.target_score};
  std::optional<Network> best;
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 1; epoch <= options.epochs; ++epoch) {
    std::mt19937_64 rng(mix_seed(options.seed ^ 0xd1b54a32d192ed03ULL, static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += sz(options.batch)) {
      const std::size_t stop_at = std::min(order.size(), start + sz(options.batch));
      std::vector<Tensor> g = head.zero_gradients().params;
      for (std::size_t k = start; k < stop_at; ++k) {
        const std::size_t i = order[k];
        const auto pass = head.forward(tr_emb[i], nn::Mode::Train,
                                       mix_seed(rng(), k));
        const double y = tr_y[i];
        const auto lg = nn::binary_cross_entropy(pass.output, y, y > 0.5 ? w_pos : w_neg);
        loss_sum += lg.loss;
        add_into(g, head.backward(pass, lg.grad, logit_end).params);
      }
      scale(g, 1.0 / static_cast<double>(stop_at - start));
      adam.step(head.parameter_list(), g);
    }

    EpochRecord rec{epoch, loss_sum / n, dvn_val_score(bundle, va_emb, va_y)};
    history.epochs.push_back(rec);
    if (options.verbose) {
      std::cerr << "dvn epoch " << epoch << " loss " << rec.train_loss;
      if (rec.val_score) std::cerr << " val_auc " << *rec.val_score;
      std::cerr << '\n';
    }
    if (!rec.val_score) continue;
    if (stop.update(epoch, *rec.val_score)) best = head;
    if (stop.done()) break;
  }

  if (best) {
    bundle.dvn_head = *best;
    history.best_epoch = stop.best_epoch;
    history.best_score = stop.best;
  } else {
    history.best_epoch = history.epochs.back().epoch;
  }
  bundle.dvn_trained = true;
  bundle.training["dvn"] = {{"epochs_run", history.epochs.size()},
                            {"best_epoch", history.best_epoch},
                            {"batch", options.batch},
                            {"lr", options.lr},
                            {"seed", options.seed}};
  return history;
}

std::string_view to_string(VerdictKind kind) {
  switch (kind) {
    case VerdictKind::Normal: return "normal";
    case VerdictKind::Dangerous: return "dangerous";
    case VerdictKind::Suppressed: return "suppressed";
  }
  return "unknown";
}

Verdict infer(const ModelBundle& bundle, const StackedSample& sample, double dvn_threshold,
              bool bump_flag, InferenceCounters& counters) {
  if (!(dvn_threshold >= 0.0 && dvn_threshold <= 1.0)) {
    throw InvalidArgument("infer: dvn threshold must lie in [0, 1]");
  }
  check_sample(bundle, sample, "infer");
  ++counters.windows;
  Verdict v;
  if (bump_flag) {
    ++counters.suppressed;
    v.kind = VerdictKind::Suppressed;
    v.reason = "bump";
    return v;
  }
  const Tensor e = embed(bundle, sample);
  ++counters.dvn_calls;
  v.dvn_score = dvn_score(bundle, e);
  if (*v.dvn_score < dvn_threshold) {
    v.kind = VerdictKind::Normal;
    return v;
  }
  ++counters.ddb_calls;
  v.kind = VerdictKind::Dangerous;
  v.class_probs = ddb_probabilities(bundle, e);
  v.activity = from_dangerous_index(static_cast<int>(argmax(v.class_probs)));
  return v;
}

void save_bundle(const ModelBundle& bundle, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw nn::ModelFormatError(nn::ModelFormatError::Kind::Io, "cannot open " + path.string() + " for writing");
  }
  const nlohmann::json meta = {{"format", "mmdrive-bundle"},
                               {"seed", bundle.seed},
                               {"architecture", bundle.architecture.to_json()},
                               {"training", bundle.training},
                               {"fe_trained", bundle.fe_trained},
                               {"dvn_trained", bundle.dvn_trained},
                               {"classes", ModelBundle::ddb_classes()}};
  const Network* nets[] = {&bundle.fe_rn_branch, &bundle.fe_rd_branch, &bundle.ddb_head,
                           &bundle.dvn_head};
  const nn::NamedBlob blobs[] = {{"norm_stats",
                                  {bundle.norm_stats.rn_min, bundle.norm_stats.rn_max,
                                   bundle.norm_stats.rd_min, bundle.norm_stats.rd_max}}};
  nn::write_container(out, meta, nets, blobs);
}

ModelBundle load_bundle(const std::filesystem::path& path) {
  using Kind = nn::ModelFormatError::Kind;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw nn::ModelFormatError(Kind::Io, "cannot open " + path.string());
  nn::Container c = nn::read_container(in);
  try {
    const auto& meta = c.metadata;
    if (meta.at("format") != "mmdrive-bundle") throw InvalidArgument("not a model bundle");
    const Architecture arch = Architecture::from_json(meta.at("architecture"));
    if (c.networks.size() != 4 || c.blobs.size() != 1 || c.blobs[0].name != "norm_stats" ||
        c.blobs[0].values.size() != 4) {
      throw InvalidArgument("unexpected bundle layout");
    }
    const Network expected[] = {build_rn_branch(arch), build_rd_branch(arch), build_ddb_head(arch),
                                build_dvn_head(arch)};
    for (std::size_t i = 0; i < 4; ++i) {
      if (c.networks[i].manifest() != expected[i].manifest()) {
        throw InvalidArgument("network '" + c.networks[i].name() + "' disagrees with the architecture");
      }
    }
    const auto& ns = c.blobs[0].values;
    ModelBundle b{std::move(c.networks[0]), std::move(c.networks[1]), std::move(c.networks[2]),
                  std::move(c.networks[3]), NormStats{ns[0], ns[1], ns[2], ns[3]},
                  meta.at("seed").get<std::uint64_t>(), arch};
    b.training = meta.at("training");
    b.fe_trained = meta.at("fe_trained").get<bool>();
    b.dvn_trained = meta.at("dvn_trained").get<bool>();
    return b;
  } catch (const nn::ModelFormatError&) {
    throw;
  } catch (const std::exception& e) {
    throw nn::ModelFormatError(Kind::ManifestMismatch, path.string() + ": " + e.what());
  }
}

}  // namespace mmdrive
