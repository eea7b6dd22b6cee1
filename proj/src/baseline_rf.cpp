#include "mmdrive/baseline_rf.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "mmdrive/error.hpp"
#include "mmdrive/radar_sim.hpp"

namespace mmdrive::rf {
namespace {

struct BlockStats {
  double min, max, mean, std;
};

template <typename Get>
BlockStats block_stats(std::size_t n, Get get) {
  double lo = get(0), hi = get(0), sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double v = get(i);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
    sum += v;
  }
  const double mean = sum / static_cast<double>(n);
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = get(i) - mean;
    ss += d * d;
  }
  return {lo, hi, mean, std::sqrt(ss / static_cast<double>(n))};
}

void push(std::vector<double>& out, const BlockStats& s) {
  out.insert(out.end(), {s.min, s.max, s.mean, s.std});
}

}  // namespace

std::vector<double> engineer_features(const StackedSample& sample) {
  const auto& rs = sample.rn.shape();
  const auto& ds = sample.rd.shape();
  if (rs.size() != 3 || ds.size() != 3 || rs[0] != 64 || rs[1] != 2 || ds[0] != 16 ||
      ds[1] != 64 || rs[2] != ds[2] || rs[2] == 0) {
    throw InvalidArgument("engineer_features: expected rn 64x2xW and rd 16x64xW, got " +
                          shape_to_string(rs) + " and " + shape_to_string(ds));
  }
  const std::size_t frames = rs[2];
  const std::size_t range_blocks = rs[0] / kProfileBlock;
  std::vector<double> out;
  out.reserve(kFeaturesPerFrame * frames);
  for (std::size_t f = 0; f < frames; ++f) {
    for (std::size_t channel = 0; channel < 2; ++channel) {
      for (std::size_t b = 0; b < range_blocks; ++b) {
        push(out, block_stats(kProfileBlock, [&](std::size_t i) {
               return sample.rn.at(b * kProfileBlock + i, channel, f);
             }));
      }
    }
    for (std::size_t b = 0; b < range_blocks; ++b) {
      push(out, block_stats(ds[0] * kProfileBlock, [&](std::size_t i) {
             return sample.rd.at(i / kProfileBlock, b * kProfileBlock + i % kProfileBlock, f);
           }));
    }
  }
  return out;
}

const TreeNode& Tree::leaf_for(std::span<const double> x) const {
  std::size_t i = 0;
  while (nodes[i].feature >= 0) {
    const TreeNode& n = nodes[i];
    i = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
  }
  return nodes[i];
}

Forest::Forest(std::size_t classes, std::size_t features, std::uint64_t seed, std::vector<Tree> trees)
    : classes_(classes), features_(features), seed_(seed), trees_(std::move(trees)) {}

namespace {

class TreeBuilder {
 public:
  TreeBuilder(std::span<const std::vector<double>> x, std::span<const int> y, std::size_t classes,
              const ForestOptions& opt, std::size_t max_features, std::uint64_t seed)
      : x_(x), y_(y), classes_(classes), opt_(opt), max_features_(max_features), rng_(seed) {
    candidates_.resize(x_.front().size());
    std::iota(candidates_.begin(), candidates_.end(), 0);
  }

  Tree build(std::vector<std::size_t> rows) {
    tree_.nodes.clear();
    grow(rows, 0);
    return std::move(tree_);
  }

 private:
  struct Split {
    int feature = -1;
    double threshold = 0.0;
    double score = 0.0;
  };

  int grow(std::vector<std::size_t>& rows, int depth) {
    const int id = static_cast<int>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    std::vector<std::size_t> counts(classes_, 0);
    for (std::size_t r : rows) ++counts[static_cast<std::size_t>(y_[r])];
    const bool pure = std::count(counts.begin(), counts.end(), 0) == static_cast<long>(classes_ - 1);
    const bool depth_cap = opt_.max_depth > 0 && depth >= opt_.max_depth;
    Split s;
    if (!pure && !depth_cap && rows.size() >= static_cast<std::size_t>(opt_.min_samples_split)) {
      s = best_split(rows, counts);
    }
    if (s.feature < 0) {
      auto& dist = tree_.nodes[static_cast<std::size_t>(id)].distribution;
      for (std::size_t c : counts) dist.push_back(static_cast<double>(c) / static_cast<double>(rows.size()));
      return id;
    }
    std::vector<std::size_t> left, right;
    for (std::size_t r : rows) {
      (x_[r][static_cast<std::size_t>(s.feature)] <= s.threshold ? left : right).push_back(r);
    }
    rows.clear();
    rows.shrink_to_fit();
    const int l = grow(left, depth + 1);
    const int r = grow(right, depth + 1);
    TreeNode& node = tree_.nodes[static_cast<std::size_t>(id)];
    node.feature = s.feature;
    node.threshold = s.threshold;
    node.left = l;
    node.right = r;
    return id;
  }

  // Maximizes sum_c nl_c^2 / nl + sum_c nr_c^2 / nr, which is the same as
  // minimizing the size-weighted Gini impurity of the children.
  Split best_split(const std::vector<std::size_t>& rows, const std::vector<std::size_t>& counts) {
    double parent_sq = 0.0;
    for (std::size_t c : counts) parent_sq += static_cast<double>(c * c);
    const auto n = static_cast<double>(rows.size());
    Split best;
    best.score = parent_sq / n;

    // Partial Fisher-Yates: the first max_features_ entries are the draw.
    for (std::size_t k = 0; k < max_features_; ++k) {
      std::uniform_int_distribution<std::size_t> pick(k, candidates_.size() - 1);
      std::swap(candidates_[k], candidates_[pick(rng_)]);
    }
    std::vector<std::size_t> order(rows);
    std::vector<std::size_t> left(classes_), right(classes_);
    for (std::size_t k = 0; k < max_features_; ++k) {
      const std::size_t f = candidates_[k];
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return x_[a][f] < x_[b][f] || (x_[a][f] == x_[b][f] && a < b);
      });
      std::fill(left.begin(), left.end(), 0);
      right = counts;
      double sq_l = 0.0, sq_r = parent_sq;
      for (std::size_t i = 0; i + 1 < order.size(); ++i) {
        const auto c = static_cast<std::size_t>(y_[order[i]]);
        sq_l += static_cast<double>(2 * left[c] + 1);
        sq_r -= static_cast<double>(2 * right[c] - 1);
        ++left[c];
        --right[c];
        const double a = x_[order[i]][f];
        const double b = x_[order[i + 1]][f];
        if (a == b) continue;
        const auto nl = static_cast<double>(i + 1);
        const double score = sq_l / nl + sq_r / (n - nl);
        if (score > best.score + 1e-12 * n) {
          double mid = a + (b - a) / 2.0;
          if (!(mid < b)) mid = a;
          best = {static_cast<int>(f), mid, score};
        }
      }
    }
    return best;
  }

  std::span<const std::vector<double>> x_;
  std::span<const int> y_;
  std::size_t classes_;
  const ForestOptions& opt_;
  std::size_t max_features_;
  std::mt19937_64 rng_;
  std::vector<std::size_t> candidates_;
  Tree tree_;
};

}  // namespace

Forest train_forest(std::span<const std::vector<double>> features, std::span<const int> labels,
                    const ForestOptions& options) {
  if (options.n_estimators < 1) throw InvalidArgument("train_forest: n_estimators must be >= 1");
  if (options.max_depth < 0) throw InvalidArgument("train_forest: max_depth must be >= 0");
  if (options.min_samples_split < 2) throw InvalidArgument("train_forest: min_samples_split must be >= 2");
  if (features.size() != labels.size()) {
    throw InvalidArgument("train_forest: " + std::to_string(features.size()) + " feature rows but " +
                          std::to_string(labels.size()) + " labels");
  }
  if (features.empty()) throw InvalidArgument("train_forest: no training rows");
  const std::size_t width = features.front().size();
  if (width == 0) throw InvalidArgument("train_forest: empty feature vectors");
  for (const auto& row : features) {
    if (row.size() != width) throw InvalidArgument("train_forest: ragged feature rows");
    for (double v : row) if (!std::isfinite(v)) throw InvalidArgument("train_forest: non-finite feature");
  }
  int top = 0;
  for (int l : labels) {
    if (l < 0) throw InvalidArgument("train_forest: negative label");
    top = std::max(top, l);
  }
  const auto classes = static_cast<std::size_t>(top) + 1;
  if (std::all_of(labels.begin(), labels.end(), [&](int l) { return l == labels.front(); })) {
    throw InvalidArgument("train_forest: at least two classes are required");
  }
  std::size_t m = options.max_features > 0
                      ? static_cast<std::size_t>(options.max_features)
                      : static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(width))));
  m = std::clamp<std::size_t>(m, 1, width);

  std::vector<Tree> trees;
  trees.reserve(static_cast<std::size_t>(options.n_estimators));
  for (int t = 0; t < options.n_estimators; ++t) {
    const std::uint64_t tree_seed = mix_seed(options.seed, static_cast<std::uint64_t>(t));
    std::mt19937_64 boot(tree_seed);
    std::uniform_int_distribution<std::size_t> draw(0, features.size() - 1);
    std::vector<std::size_t> rows(features.size());
    for (auto& r : rows) r = draw(boot);
    TreeBuilder builder(features, labels, classes, options, m, mix_seed(tree_seed, 0x5eed));
    trees.push_back(builder.build(std::move(rows)));
  }
  return Forest(classes, width, options.seed, std::move(trees));
}

ForestPrediction predict_forest(const Forest& forest, std::span<const double> feature) {
  if (!forest.trained()) throw InvalidState("predict_forest: forest is not trained");
  if (feature.size() != forest.features()) {
    throw InvalidArgument("predict_forest: expected " + std::to_string(forest.features()) +
                          " features, got " + std::to_string(feature.size()));
  }
  ForestPrediction p;
  p.probs.assign(forest.classes(), 0.0);
  for (const Tree& t : forest.trees()) {
    const auto& dist = t.leaf_for(feature).distribution;
    for (std::size_t c = 0; c < dist.size(); ++c) p.probs[c] += dist[c];
  }
  const auto n = static_cast<double>(forest.size());
  for (double& v : p.probs) v /= n;
  for (std::size_t c = 1; c < p.probs.size(); ++c) {
    if (p.probs[c] > p.probs[static_cast<std::size_t>(p.label)]) p.label = static_cast<int>(c);
  }
  return p;
}

nlohmann::json Forest::to_json() const {
  nlohmann::json trees = nlohmann::json::array();
  for (const Tree& t : trees_) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const TreeNode& n : t.nodes) {
      if (n.feature < 0) nodes.push_back({{"leaf", n.distribution}});
      else nodes.push_back({{"feature", n.feature}, {"threshold", n.threshold}, {"left", n.left}, {"right", n.right}});
    }
    trees.push_back(std::move(nodes));
  }
  return {{"format", "mmdrive-forest"}, {"version", 1},        {"classes", classes_},
          {"features", features_},      {"seed", seed_},       {"trees", std::move(trees)}};
}

Forest Forest::from_json(const nlohmann::json& j) {
  try {
    if (j.at("format") != "mmdrive-forest" || j.at("version") != 1) {
      throw InvalidArgument("forest json: unsupported format");
    }
    const auto classes = j.at("classes").get<std::size_t>();
    const auto features = j.at("features").get<std::size_t>();
    std::vector<Tree> trees;
    for (const auto& jt : j.at("trees")) {
      Tree t;
      for (const auto& jn : jt) {
        TreeNode n;
        if (jn.contains("leaf")) {
          n.distribution = jn.at("leaf").get<std::vector<double>>();
          if (n.distribution.size() != classes) throw InvalidArgument("forest json: leaf width");
        } else {
          n.feature = jn.at("feature").get<int>();
          n.threshold = jn.at("threshold").get<double>();
          n.left = jn.at("left").get<int>();
          n.right = jn.at("right").get<int>();
        }
        t.nodes.push_back(std::move(n));
      }
      // Children must point forward so traversal always terminates in range.
      for (std::size_t i = 0; i < t.nodes.size(); ++i) {
        const TreeNode& n = t.nodes[i];
        if (n.feature < 0) continue;
        const auto bad = [&](int c) { return c <= static_cast<int>(i) || c >= static_cast<int>(t.nodes.size()); };
        if (bad(n.left) || bad(n.right) || static_cast<std::size_t>(n.feature) >= features) {
          throw InvalidArgument("forest json: node " + std::to_string(i) + " is malformed");
        }
      }
      if (t.nodes.empty()) throw InvalidArgument("forest json: empty tree");
      trees.push_back(std::move(t));
    }
    return Forest(classes, features, j.at("seed").get<std::uint64_t>(), std::move(trees));
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("forest json: ") + e.what());
  }
}

}  // namespace mmdrive::rf
