#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "mmdrive/tensor.hpp"

namespace mmdrive::nn {

enum class Mode { Train, Eval };
enum class Padding { Valid, Same };

struct Parameter {
  std::string name;
  Tensor value;
};

struct ForwardContext {
  Mode mode = Mode::Eval;
  std::mt19937_64* rng = nullptr;  // required for Dropout in train mode
};

/// One differentiable stage. Layers are stateless apart from their
/// parameters; per-call intermediates go into `aux`.
class Layer {
 public:
  virtual ~Layer() = default;

  virtual std::string kind() const = 0;
  /// Throws InvalidArgument when `in` is not an acceptable input shape.
  virtual Tensor::Shape output_shape(const Tensor::Shape& in) const = 0;
  virtual Tensor forward(const Tensor& in, Tensor& aux, const ForwardContext& ctx) const = 0;
  /// Accumulates into `param_grads` (one per parameter, pre-shaped) and
  /// returns dL/d(in), or an empty tensor when `need_input_grad` is false.
  virtual Tensor backward(const Tensor& in, const Tensor& out, const Tensor& aux,
                          const Tensor& grad_out, std::span<Tensor> param_grads,
                          bool need_input_grad) const = 0;

  virtual std::span<Parameter> parameters() { return {}; }
  virtual std::span<const Parameter> parameters() const { return {}; }
  virtual void initialize(std::mt19937_64& /*rng*/) {}
  /// True for layers through which no gradient flows backward.
  virtual bool stops_gradient() const { return false; }

  virtual nlohmann::json config() const { return {{"kind", kind()}}; }
  virtual std::unique_ptr<Layer> clone() const = 0;
};

class Conv2D final : public Layer {
 public:
  Conv2D(int kernel_h, int kernel_w, int in_channels, int out_channels, Padding padding);

  std::string kind() const override { return "Conv2D"; }
  Tensor::Shape output_shape(const Tensor::Shape& in) const override;
  Tensor forward(const Tensor& in, Tensor& aux, const ForwardContext& ctx) const override;
  Tensor backward(const Tensor& in, const Tensor& out, const Tensor& aux, const Tensor& grad_out,
                  std::span<Tensor> param_grads, bool need_input_grad) const override;
  std::span<Parameter> parameters() override { return params_; }
  std::span<const Parameter> parameters() const override { return params_; }
  void initialize(std::mt19937_64& rng) override;
  nlohmann::json config() const override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Conv2D>(*this); }

  int kernel_h() const { return kh_; }
  int kernel_w() const { return kw_; }
  int in_channels() const { return cin_; }
  int out_channels() const { return cout_; }
  Padding padding() const { return padding_; }

 private:
  int kh_, kw_, cin_, cout_;
  Padding padding_;
  std::vector<Parameter> params_;  // weight {kh, kw, cin, cout}, bias {cout}
};

class Dense final : public Layer {
 public:
  Dense(int in, int out);

  std::string kind() const override { return "Dense"; }
  Tensor::Shape output_shape(const Tensor::Shape& in) const override;
  Tensor forward(const Tensor& in, Tensor& aux, const ForwardContext& ctx) const override;
  Tensor backward(const Tensor& in, const Tensor& out, const Tensor& aux, const Tensor& grad_out,
                  std::span<Tensor> param_grads, bool need_input_grad) const override;
  std::span<Parameter> parameters() override { return params_; }
  std::span<const Parameter> parameters() const override { return params_; }
  void initialize(std::mt19937_64& rng) override;
  nlohmann::json config() const override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Dense>(*this); }

  int in_features() const { return in_; }
  int out_features() const { return out_; }

 private:
  int in_, out_;
  std::vector<Parameter> params_;  // weight {in, out}, bias {out}
};

class ReLU final : public Layer {
 public:
  std::string kind() const override { return "ReLU"; }
  Tensor::Shape output_shape(const Tensor::Shape& in) const override { return in; }
  Tensor forward(const Tensor& in, Tensor& aux, const ForwardContext& ctx) const override;
  Tensor backward(const Tensor& in, const Tensor& out, const Tensor& aux, const Tensor& grad_out,
                  std::span<Tensor> param_grads, bool need_input_grad) const override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<ReLU>(*this); }
};

/// Logistic function, elementwise.
class Sigmoid final : public Layer {
 public:
  std::string kind() const override { return "Sigmoid"; }
  Tensor::Shape output_shape(const Tensor::Shape& in) const override { return in; }
  Tensor forward(const Tensor& in, Tensor& aux, const ForwardContext& ctx) const override;
  Tensor backward(const Tensor& in, const Tensor& out, const Tensor& aux, const Tensor& grad_out,
                  std::span<Tensor> param_grads, bool need_input_grad) const override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Sigmoid>(*this); }
};

/// H x W x C -> C, mean over the spatial axes.
class GlobalAvgPool final : public Layer {
 public:
  std::string kind() const override { return "GlobalAvgPool"; }
  Tensor::Shape output_shape(const Tensor::Shape& in) const override;
  Tensor forward(const Tensor& in, Tensor& aux, const ForwardContext& ctx) const override;
  Tensor backward(const Tensor& in, const Tensor& out, const Tensor& aux, const Tensor& grad_out,
                  std::span<Tensor> param_grads, bool need_input_grad) const override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<GlobalAvgPool>(*this); }
};

/// Inverted dropout: active only in train mode, kept units scaled by 1/(1-rate).
class Dropout final : public Layer {
 public:
  explicit Dropout(double rate);

  std::string kind() const override { return "Dropout"; }
  Tensor::Shape output_shape(const Tensor::Shape& in) const override { return in; }
  Tensor forward(const Tensor& in, Tensor& aux, const ForwardContext& ctx) const override;
  Tensor backward(const Tensor& in, const Tensor& out, const Tensor& aux, const Tensor& grad_out,
                  std::span<Tensor> param_grads, bool need_input_grad) const override;
  nlohmann::json config() const override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Dropout>(*this); }

  double rate() const { return rate_; }

 private:
  double rate_;
};

/// Softmax over a rank-1 input.
class Softmax final : public Layer {
 public:
  std::string kind() const override { return "Softmax"; }
  Tensor::Shape output_shape(const Tensor::Shape& in) const override;
  Tensor forward(const Tensor& in, Tensor& aux, const ForwardContext& ctx) const override;
  Tensor backward(const Tensor& in, const Tensor& out, const Tensor& aux, const Tensor& grad_out,
                  std::span<Tensor> param_grads, bool need_input_grad) const override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Softmax>(*this); }
};

/// Identity forward; blocks all gradient flow backward.
class GradientStop final : public Layer {
 public:
  std::string kind() const override { return "GradientStop"; }
  Tensor::Shape output_shape(const Tensor::Shape& in) const override { return in; }
  Tensor forward(const Tensor& in, Tensor& aux, const ForwardContext& ctx) const override;
  Tensor backward(const Tensor& in, const Tensor& out, const Tensor& aux, const Tensor& grad_out,
                  std::span<Tensor> param_grads, bool need_input_grad) const override;
  bool stops_gradient() const override { return true; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<GradientStop>(*this); }
};

/// Rebuilds a layer (without trained parameters) from its config().
std::unique_ptr<Layer> layer_from_config(const nlohmann::json& config);

}  // namespace mmdrive::nn
