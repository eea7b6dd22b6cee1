#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "json.hpp"
#include "mmdrive/preprocess.hpp"

namespace mmdrive::rf {

inline constexpr std::size_t kProfileBlock = 16;     // 16x1 blocks on each profile
inline constexpr std::size_t kStatsPerBlock = 4;     // min, max, mean, std
inline constexpr std::size_t kFeaturesPerFrame = 48; // (4 + 4 + 4) blocks x 4 stats
inline constexpr std::size_t kFeatureCount = kFeaturesPerFrame * kDefaultWindow;

/// Block statistics of a stacked sample. Layout, outermost first: frame,
/// section (range profile, noise profile, range-doppler), block along the
/// range axis, statistic (min, max, mean, population std). Range-doppler
/// blocks are 16 doppler rows x 16 range bins.
std::vector<double> engineer_features(const StackedSample& sample);

struct ForestOptions {
  int n_estimators = 100;
  int max_depth = 0;          // 0 = unlimited
  int max_features = 0;       // 0 = floor(sqrt(feature count))
  int min_samples_split = 2;
  std::uint64_t seed = 1;
};

struct TreeNode {
  int feature = -1;           // -1 marks a leaf
  double threshold = 0.0;     // x[feature] <= threshold goes left
  int left = -1;
  int right = -1;
  std::vector<double> distribution;  // leaves only
};

struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root
  const TreeNode& leaf_for(std::span<const double> x) const;
};

struct ForestPrediction {
  int label = 0;
  std::vector<double> probs;
};

class Forest {
 public:
  Forest() = default;
  Forest(std::size_t classes, std::size_t features, std::uint64_t seed, std::vector<Tree> trees);

  bool trained() const { return !trees_.empty(); }
  std::size_t classes() const { return classes_; }
  std::size_t features() const { return features_; }
  std::size_t size() const { return trees_.size(); }
  std::uint64_t seed() const { return seed_; }
  const std::vector<Tree>& trees() const { return trees_; }

  nlohmann::json to_json() const;
  static Forest from_json(const nlohmann::json& j);

 private:
  std::size_t classes_ = 0;
  std::size_t features_ = 0;
  std::uint64_t seed_ = 0;
  std::vector<Tree> trees_;
};

/// Labels are 0-based class indices; the class count is 1 + max label.
Forest train_forest(std::span<const std::vector<double>> features, std::span<const int> labels,
                    const ForestOptions& options = {});

/// Mean leaf distribution over all trees; ties resolve to the lowest index.
ForestPrediction predict_forest(const Forest& forest, std::span<const double> feature);

}  // namespace mmdrive::rf
