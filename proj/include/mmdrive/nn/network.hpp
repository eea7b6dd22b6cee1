#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "mmdrive/nn/layers.hpp"
#include "mmdrive/tensor.hpp"

namespace mmdrive::nn {

/// Per-layer intermediates retained by forward() for backward().
struct ForwardPass {
  Tensor output;
  std::vector<Tensor> inputs;  // input of layer i
  std::vector<Tensor> aux;     // layer-private intermediates
  std::uint64_t network_id = 0;
  std::uint64_t generation = 0;
};

struct Gradients {
  std::vector<Tensor> params;  // aligned with Network::parameter_list()
  Tensor input;                // empty unless requested
};

/// Ordered stack of layers with a declared input shape. Shapes are checked
/// when layers are appended, so a constructed network is always consistent.
class Network {
 public:
  static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

  Network() = default;
  Network(std::string name, Tensor::Shape input_shape);
  Network(const Network& other);
  Network& operator=(const Network& other);
  Network(Network&&) noexcept = default;
  Network& operator=(Network&&) noexcept = default;

  /// Appends a layer after validating it against the current output shape.
  Network& add(std::unique_ptr<Layer> layer);
  template <typename L, typename... Args>
  Network& emplace(Args&&... args) {
    return add(std::make_unique<L>(std::forward<Args>(args)...));
  }

  void initialize(std::uint64_t seed);

  const std::string& name() const { return name_; }
  const Tensor::Shape& input_shape() const { return input_shape_; }
  const Tensor::Shape& output_shape() const { return shapes_.back(); }
  std::size_t size() const { return layers_.size(); }
  const Layer& layer(std::size_t i) const { return *layers_.at(i); }

  /// Mutable access to all parameters; invalidates outstanding ForwardPass objects.
  std::vector<Parameter*> parameter_list();
  std::vector<const Parameter*> parameter_list() const;
  std::size_t parameter_count() const;

  ForwardPass forward(const Tensor& input, Mode mode, std::uint64_t seed = 0) const;
  Tensor predict(const Tensor& input) const { return forward(input, Mode::Eval).output; }

  /// Reverse-mode pass. `upstream` is dL/d(output of layer end-1); layers
  /// at or after `end` are skipped. Throws InvalidState for a pass that did
  /// not come from this network in its current parameter state.
  Gradients backward(const ForwardPass& pass, const Tensor& upstream, std::size_t end = npos,
                     bool need_input_grad = false) const;

  Gradients zero_gradients() const;

  nlohmann::json manifest() const;
  static Network from_manifest(const nlohmann::json& manifest);

 private:
  static std::uint64_t next_id();

  std::string name_;
  Tensor::Shape input_shape_;
  std::vector<std::unique_ptr<Layer>> layers_;
  std::vector<Tensor::Shape> shapes_;  // shapes_[0] = input, shapes_[i+1] = output of layer i
  std::uint64_t id_ = next_id();
  std::uint64_t generation_ = 0;
};

/// Loss and gradient with respect to the pre-softmax logits.
struct LossGrad {
  double loss = 0.0;
  Tensor grad;
};

/// -log p[target]; gradient p - onehot(target) w.r.t. the logits.
LossGrad cross_entropy(const Tensor& probabilities, std::size_t target);

/// Weighted binary cross-entropy on a logistic output p; gradient
/// weight * (p - y) w.r.t. the logit.
LossGrad binary_cross_entropy(const Tensor& probability, double target, double weight = 1.0);

}  // namespace mmdrive::nn
