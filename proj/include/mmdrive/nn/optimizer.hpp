#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mmdrive/nn/layers.hpp"

namespace mmdrive::nn {

struct AdamHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adaptive-moment optimizer with bias-corrected first and second moments.
/// State is bound to the parameter list seen on the first step.
class Adam {
 public:
  explicit Adam(AdamHyper hyper = {}) : hyper_(hyper) {}

  /// Applies one update. Throws InvalidArgument naming the parameter when a
  /// gradient is non-finite or mis-shaped; no parameter is touched then.
  void step(std::span<Parameter* const> params, std::span<const Tensor> grads);

  std::size_t steps() const { return t_; }
  const AdamHyper& hyper() const { return hyper_; }

 private:
  AdamHyper hyper_;
  std::size_t t_ = 0;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
};

}  // namespace mmdrive::nn
