#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>

#include "doctest.h"
#include "mmdrive/error.hpp"
#include "mmdrive/models.hpp"
#include "mmdrive/nn/serialization.hpp"
#include "../support/oracles.hpp"

using namespace mmdrive;

namespace {

Architecture small_arch() {
  Architecture a;
  a.window = 2;
  a.range_bins = 8;
  a.doppler_bins = 4;
  a.rn_channels = {4, 4, 6};
  a.rd_channels = {4, 4, 4, 6};
  a.hidden = 8;
  a.dropout = 0.0;
  return a;
}

// Class c lights range bin c and doppler row c % 4; everything else is noise.
StackedSample toy_sample(const ModelBundle& b, Activity label, std::mt19937_64& rng) {
  const auto& arch = b.architecture;
  StackedSample s;
  s.label = label;
  s.rn = oracle::random_tensor(b.fe_rn_branch.input_shape(), rng, 0.0, 0.1);
  s.rd = oracle::random_tensor(b.fe_rd_branch.input_shape(), rng, 0.0, 0.1);
  const int c = static_cast<int>(label);
  const auto rb = static_cast<std::size_t>(c % arch.range_bins);
  const auto w = static_cast<std::size_t>(arch.window);
  for (std::size_t ch = 0; ch < 2; ++ch)
    for (std::size_t t = 0; t < w; ++t) s.rn.at(rb, ch, t) = 1.0;
  const auto row = static_cast<std::size_t>(c % arch.doppler_bins);
  for (std::size_t t = 0; t < w; ++t) s.rd.at(row, rb, t) = 1.0 - 0.1 * (c / 4);
  return s;
}

std::vector<StackedSample> toy_set(const ModelBundle& b, bool with_normal, int per_class,
                                   std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<StackedSample> out;
  for (Activity a : all_activities()) {
    if (a == Activity::Normal && !with_normal) continue;
    const int n = a == Activity::Normal ? per_class * 3 : per_class;
    for (int i = 0; i < n; ++i) out.push_back(toy_sample(b, a, rng));
  }
  return out;
}

bool same_params(const nn::Network& a, const nn::Network& b) {
  const auto pa = a.parameter_list();
  const auto pb = b.parameter_list();
  if (pa.size() != pb.size()) return false;
  for (std::size_t i = 0; i < pa.size(); ++i)
    if (!(pa[i]->value == pb[i]->value)) return false;
  return true;
}

}  // namespace

TEST_SUITE("models") {

TEST_CASE("production shapes") {
  const ModelBundle b = build_bundle(1);
  CHECK(b.fe_rn_branch.input_shape() == Tensor::Shape{64, 2, 10});
  CHECK(b.fe_rd_branch.input_shape() == Tensor::Shape{16, 64, 10});
  CHECK(b.fe_rn_branch.output_shape() == Tensor::Shape{kRnEmbedding});
  CHECK(b.fe_rd_branch.output_shape() == Tensor::Shape{kRdEmbedding});
  CHECK(b.ddb_head.output_shape() == Tensor::Shape{9});
  CHECK(b.dvn_head.output_shape() == Tensor::Shape{1});
  CHECK(b.dvn_head.layer(0).stops_gradient());
  StackedSample s{Tensor({64, 2, 10}, 0.3), Tensor({16, 64, 10}, 0.2)};
  const Tensor e = embed(b, s);
  CHECK(e.shape() == Tensor::Shape{kEmbedding});
  const auto p = ddb_probabilities(b, e);
  CHECK(p.size() == 9);
  CHECK(std::accumulate(p.begin(), p.end(), 0.0) == doctest::Approx(1.0));
  const double d = dvn_score(b, e);
  CHECK(d > 0.0);
  CHECK(d < 1.0);
  CHECK(ModelBundle::ddb_classes().size() == 9);
  CHECK_THROWS_AS(embed(b, StackedSample{Tensor({64, 2, 9}), Tensor({16, 64, 10})}), InvalidArgument);
}

TEST_CASE("architecture validation and json") {
  Architecture a = small_arch();
  CHECK(Architecture::from_json(a.to_json()).to_json() == a.to_json());
  a.rd_channels = {4, 4};
  CHECK_THROWS_AS(a.validate(), InvalidArgument);
  a = small_arch();
  a.range_bins = 4;
  CHECK_THROWS_AS(a.validate(), InvalidArgument);
}

TEST_CASE("ddb training rejects bad input") {
  ModelBundle b = build_bundle(2, small_arch());
  auto data = toy_set(b, false, 2, 1);
  std::vector<StackedSample> missing;
  for (const auto& s : data)
    if (s.label != Activity::Yawning) missing.push_back(s);
  try {
    (void)train_ddb(b, missing, {}, {.epochs = 1});
    FAIL("expected missing-class error");
  } catch (const InvalidArgument& e) {
    CHECK(std::string(e.what()).find("Yawning") != std::string::npos);
  }
  auto with_normal = toy_set(b, true, 2, 1);
  CHECK_THROWS_AS(train_ddb(b, with_normal, {}, {.epochs = 1}), InvalidArgument);
  CHECK_THROWS_AS(train_dvn(b, with_normal, {}, {.epochs = 1}), InvalidState);
}

TEST_CASE("ddb training fits a separable toy set and is deterministic") {
  const Architecture arch = small_arch();
  ModelBundle a = build_bundle(3, arch);
  ModelBundle b = build_bundle(3, arch);
  const auto train = toy_set(a, false, 4, 11);
  const auto val = toy_set(a, false, 2, 12);
  const TrainOptions opt{.epochs = 30, .batch = 4, .lr = 1e-2, .patience = 30, .seed = 5};
  const auto ha = train_ddb(a, train, val, opt);
  const auto hb = train_ddb(b, train, val, opt);
  CHECK(ha == hb);
  CHECK(same_params(a.fe_rn_branch, b.fe_rn_branch));
  CHECK(same_params(a.ddb_head, b.ddb_head));
  CHECK(a.fe_trained);
  REQUIRE(!ha.epochs.empty());
  CHECK(ha.epochs.back().train_loss < std::log(9.0) * 0.5);
  CHECK(ha.best_score > 0.8);
  CHECK(a.training.contains("ddb"));
  std::size_t correct = 0;
  for (const auto& x : train) {
    const auto p = ddb_probabilities(a, embed(a, x));
    const auto best = std::max_element(p.begin(), p.end()) - p.begin();
    correct += from_dangerous_index(static_cast<int>(best)) == x.label;
  }
  CHECK(correct == train.size());
}

TEST_CASE("twenty samples and two hundred steps beat the uniform loss") {
  ModelBundle b = build_bundle(8, small_arch());
  auto train = toy_set(b, false, 2, 31);
  std::mt19937_64 rng(32);
  train.push_back(toy_sample(b, Activity::TalkingLeft, rng));
  train.push_back(toy_sample(b, Activity::Drinking, rng));
  REQUIRE(train.size() == 20);
  // One Adam step per epoch.
  const auto h = train_ddb(b, train, {}, {.epochs = 200, .batch = 20, .lr = 1e-3, .patience = 200});
  CHECK(h.epochs.size() == 200);
  CHECK(h.epochs.back().train_loss < std::log(9.0));
}

TEST_CASE("dvn training leaves the extractor bit-identical") {
  const Architecture arch = small_arch();
  ModelBundle b = build_bundle(4, arch);
  const auto dangerous = toy_set(b, false, 3, 21);
  (void)train_ddb(b, dangerous, {}, {.epochs = 3, .batch = 4, .lr = 1e-2});
  const ModelBundle before = b;
  const auto all = toy_set(b, true, 3, 22);
  const auto val = toy_set(b, true, 1, 23);
  const auto h = train_dvn(b, all, val, {.epochs = 20, .batch = 4, .lr = 1e-2});
  CHECK(same_params(b.fe_rn_branch, before.fe_rn_branch));
  CHECK(same_params(b.fe_rd_branch, before.fe_rd_branch));
  CHECK(same_params(b.ddb_head, before.ddb_head));
  CHECK(!same_params(b.dvn_head, before.dvn_head));
  CHECK(b.dvn_trained);
  CHECK(h.best_score > 0.95);

  std::vector<StackedSample> only_normal;
  for (const auto& s : all)
    if (s.label == Activity::Normal) only_normal.push_back(s);
  CHECK_THROWS_AS(train_dvn(b, only_normal, {}, {.epochs = 1}), InvalidArgument);
}

TEST_CASE("two-stage inference") {
  const ModelBundle b = build_bundle(5, small_arch());
  std::mt19937_64 rng(2);
  const StackedSample s = toy_sample(b, Activity::Drinking, rng);
  InferenceCounters c;
  const Verdict bumped = infer(b, s, 0.5, true, c);
  CHECK(bumped.kind == VerdictKind::Suppressed);
  CHECK(bumped.reason == "bump");
  CHECK(!bumped.dvn_score);
  CHECK(c.dvn_calls == 0);
  const Verdict always = infer(b, s, 0.0, false, c);
  CHECK(always.kind == VerdictKind::Dangerous);
  REQUIRE(always.activity);
  CHECK(is_dangerous(*always.activity));
  REQUIRE(always.class_probs.size() == 9);
  CHECK(std::accumulate(always.class_probs.begin(), always.class_probs.end(), 0.0) ==
        doctest::Approx(1.0).epsilon(1e-6));
  const auto top = std::max_element(always.class_probs.begin(), always.class_probs.end());
  CHECK(from_dangerous_index(static_cast<int>(top - always.class_probs.begin())) == *always.activity);
  CHECK(*always.dvn_score >= 0.0);
  const Verdict never = infer(b, s, 1.0, false, c);
  CHECK(never.kind == VerdictKind::Normal);
  CHECK(never.class_probs.empty());
  CHECK(c.windows == 3);
  CHECK(c.suppressed == 1);
  CHECK(c.dvn_calls == 2);
  CHECK(c.ddb_calls == 1);
  CHECK_THROWS_AS(infer(b, s, 1.5, false, c), InvalidArgument);
  CHECK(to_string(VerdictKind::Suppressed) == "suppressed");
}

TEST_CASE("bundle save/load round trip") {
  ModelBundle b = build_bundle(6, small_arch());
  b.norm_stats = {1.0, 50.0, 2.0, 60.0};
  b.fe_trained = true;
  const auto dir = std::filesystem::temp_directory_path() / "mmdrive_models_test";
  std::filesystem::create_directories(dir);
  const auto path = dir / "bundle.mmdr";
  save_bundle(b, path);
  const ModelBundle r = load_bundle(path);
  CHECK(r.seed == 6);
  CHECK(r.fe_trained);
  CHECK(!r.dvn_trained);
  CHECK(r.norm_stats.rd_max == 60.0);
  CHECK(r.architecture.to_json() == b.architecture.to_json());
  std::mt19937_64 rng(9);
  for (int i = 0; i < 100; ++i) {
    const auto s = toy_sample(b, activity_from_index(i % kActivityCount), rng);
    const Tensor e1 = embed(b, s), e2 = embed(r, s);
    CHECK(e1 == e2);
    CHECK(ddb_probabilities(b, e1) == ddb_probabilities(r, e2));
    CHECK(dvn_score(b, e1) == dvn_score(r, e2));
  }

  std::string bytes;
  {
    std::ifstream in(path, std::ios::binary);
    bytes.assign(std::istreambuf_iterator<char>(in), {});
  }
  auto kind_after_write = [&](const std::string& data) {
    const auto p = dir / "broken.mmdr";
    std::ofstream(p, std::ios::binary).write(data.data(), static_cast<std::streamsize>(data.size()));
    try {
      (void)load_bundle(p);
    } catch (const nn::ModelFormatError& e) {
      return e.kind();
    }
    FAIL("load succeeded");
    return nn::ModelFormatError::Kind::Io;
  };
  using K = nn::ModelFormatError::Kind;
  CHECK(kind_after_write(bytes.substr(0, bytes.size() / 2)) == K::Truncated);
  std::string v = bytes;
  v[8] = 9;
  CHECK(kind_after_write(v) == K::VersionMismatch);
  try {
    (void)load_bundle(dir / "does_not_exist.mmdr");
    FAIL("load succeeded");
  } catch (const nn::ModelFormatError& e) {
    CHECK(e.kind() == K::Io);
  }
  std::filesystem::remove_all(dir);
}

}
