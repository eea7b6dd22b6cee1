#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "mmdrive/activity.hpp"
#include "mmdrive/nn/network.hpp"
#include "mmdrive/preprocess.hpp"

namespace mmdrive {

inline constexpr std::size_t kRnEmbedding = 96;
inline constexpr std::size_t kRdEmbedding = 128;
inline constexpr std::size_t kEmbedding = kRnEmbedding + kRdEmbedding;

/// Layer widths of the fused network. The defaults are the production
/// model; the gradient tests shrink everything.
struct Architecture {
  int window = kDefaultWindow;
  int range_bins = 64;
  int doppler_bins = 16;
  std::vector<int> rn_channels{32, 64, 96};
  std::vector<int> rd_channels{32, 64, 96, 128};
  int hidden = 64;
  double dropout = 0.1;

  std::size_t rn_embedding() const { return static_cast<std::size_t>(rn_channels.back()); }
  std::size_t rd_embedding() const { return static_cast<std::size_t>(rd_channels.back()); }
  std::size_t embedding() const { return rn_embedding() + rd_embedding(); }
  void validate() const;

  nlohmann::json to_json() const;
  static Architecture from_json(const nlohmann::json& j);
};

nn::Network build_rn_branch(const Architecture& arch);
nn::Network build_rd_branch(const Architecture& arch);
/// 9-way softmax classifier over the fused embedding.
nn::Network build_ddb_head(const Architecture& arch);
/// Binary head; its first layer blocks gradients into the embedding.
nn::Network build_dvn_head(const Architecture& arch);

struct ModelBundle {
  nn::Network fe_rn_branch;
  nn::Network fe_rd_branch;
  nn::Network ddb_head;
  nn::Network dvn_head;
  NormStats norm_stats;

  std::uint64_t seed = 0;
  Architecture architecture;
  nlohmann::json training = nlohmann::json::object();
  bool fe_trained = false;
  bool dvn_trained = false;

  /// Class names in ddb output order.
  static std::vector<std::string> ddb_classes();
};

ModelBundle build_bundle(std::uint64_t seed, const Architecture& arch = {});

/// Fused FE embedding (eval mode) of one normalized sample.
Tensor embed(const ModelBundle& bundle, const StackedSample& sample);

struct TrainOptions {
  int epochs = 100;
  int batch = 32;
  double lr = 1e-3;
  int patience = 10;
  std::uint64_t seed = 1;
  /// Stop as soon as the validation score reaches this value.
  double target_score = 1.0;
  bool verbose = false;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  /// DDB: validation weighted F1. DVN: validation AUC. Empty without a val set.
  std::optional<double> val_score;
  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;
  double best_score = 0.0;
  friend bool operator==(const TrainHistory&, const TrainHistory&) = default;
};

/// Joint FE + DDB training on dangerous-class samples. The parameters of
/// the best validation epoch are kept.
TrainHistory train_ddb(ModelBundle& bundle, std::span<const StackedSample> train,
                       std::span<const StackedSample> val, const TrainOptions& options = {});

/// Trains only dvn_head on frozen embeddings; labels are Normal vs the rest.
TrainHistory train_dvn(ModelBundle& bundle, std::span<const StackedSample> train,
                       std::span<const StackedSample> val, const TrainOptions& options = {});

/// Probabilities over the 9 dangerous classes.
std::vector<double> ddb_probabilities(const ModelBundle& bundle, const Tensor& embedding);
double dvn_score(const ModelBundle& bundle, const Tensor& embedding);

enum class VerdictKind { Normal, Dangerous, Suppressed };
std::string_view to_string(VerdictKind kind);

struct Verdict {
  VerdictKind kind = VerdictKind::Normal;
  std::optional<Activity> activity;  // Dangerous only
  std::vector<double> class_probs;   // Dangerous only, ddb order
  std::optional<double> dvn_score;   // absent when suppressed
  std::string reason;                // "bump" when suppressed
};

struct InferenceCounters {
  std::size_t windows = 0;
  std::size_t suppressed = 0;
  std::size_t dvn_calls = 0;
  std::size_t ddb_calls = 0;
};

/// Two-stage inference: DDB runs only when the DVN gate fires.
Verdict infer(const ModelBundle& bundle, const StackedSample& sample, double dvn_threshold,
              bool bump_flag, InferenceCounters& counters);

void save_bundle(const ModelBundle& bundle, const std::filesystem::path& path);
ModelBundle load_bundle(const std::filesystem::path& path);

}  // namespace mmdrive
