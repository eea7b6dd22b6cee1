#include "mmdrive/nn/network.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <random>

#include "mmdrive/error.hpp"

namespace mmdrive::nn {

std::uint64_t Network::next_id() {
  static std::atomic<std::uint64_t> counter{1};
  return counter.fetch_add(1);
}

Network::Network(std::string name, Tensor::Shape input_shape)
    : name_(std::move(name)), input_shape_(std::move(input_shape)), shapes_{input_shape_} {}

Network::Network(const Network& other)
    : name_(other.name_),
      input_shape_(other.input_shape_),
      shapes_(other.shapes_),
      id_(next_id()),
      generation_(0) {
  layers_.reserve(other.layers_.size());
  for (const auto& l : other.layers_) layers_.push_back(l->clone());
}

Network& Network::operator=(const Network& other) {
  if (this != &other) {
    Network copy(other);
    *this = std::move(copy);
  }
  return *this;
}

Network& Network::add(std::unique_ptr<Layer> layer) {
  if (shapes_.empty()) shapes_.push_back(input_shape_);
  Tensor::Shape out;
  try {
    out = layer->output_shape(shapes_.back());
  } catch (const InvalidArgument& e) {
    throw InvalidArgument(name_ + " layer " + std::to_string(layers_.size()) + " (" +
                          layer->kind() + "): " + e.what());
  }
  layers_.push_back(std::move(layer));
  shapes_.push_back(std::move(out));
  return *this;
}

void Network::initialize(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (auto& l : layers_) l->initialize(rng);
  ++generation_;
}

std::vector<Parameter*> Network::parameter_list() {
  ++generation_;
  std::vector<Parameter*> out;
  for (auto& l : layers_) {
    for (Parameter& p : l->parameters()) out.push_back(&p);
  }
  return out;
}

std::vector<const Parameter*> Network::parameter_list() const {
  std::vector<const Parameter*> out;
  for (const auto& l : layers_) {
    for (const Parameter& p : std::as_const(*l).parameters()) out.push_back(&p);
  }
  return out;
}

std::size_t Network::parameter_count() const {
  std::size_t n = 0;
  for (const Parameter* p : parameter_list()) n += p->value.size();
  return n;
}

ForwardPass Network::forward(const Tensor& input, Mode mode, std::uint64_t seed) const {
  if (input.shape() != input_shape_) {
    throw InvalidArgument(name_ + ": input shape " + shape_to_string(input.shape()) +
                          " does not match declared " + shape_to_string(input_shape_) +
                          " (layer 0)");
  }
  ForwardPass pass;
  pass.network_id = id_;
  pass.generation = generation_;
  pass.inputs.resize(layers_.size());
  pass.aux.resize(layers_.size());
  std::mt19937_64 rng(seed);
  ForwardContext ctx{mode, &rng};
  Tensor current = input;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    Tensor next = layers_[i]->forward(current, pass.aux[i], ctx);
    pass.inputs[i] = std::move(current);
    current = std::move(next);
  }
  pass.output = std::move(current);
  return pass;
}

Gradients Network::zero_gradients() const {
  Gradients g;
  for (const Parameter* p : parameter_list()) g.params.emplace_back(p->value.shape());
  return g;
}

Gradients Network::backward(const ForwardPass& pass, const Tensor& upstream, std::size_t end,
                            bool need_input_grad) const {
  if (pass.network_id != id_ || pass.generation != generation_ ||
      pass.inputs.size() != layers_.size()) {
    throw InvalidState(name_ + ": forward pass is stale or belongs to another network");
  }
  if (end == npos) end = layers_.size();
  if (end > layers_.size()) throw InvalidArgument(name_ + ": backward end past last layer");
  const Tensor::Shape& expected = shapes_[end];
  if (upstream.shape() != expected) {
    throw InvalidArgument(name_ + ": upstream gradient shape " + shape_to_string(upstream.shape()) +
                          " does not match " + shape_to_string(expected));
  }

  Gradients grads = zero_gradients();
  // Offsets of each layer's parameters inside grads.params.
  std::vector<std::size_t> offset(layers_.size() + 1, 0);
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    offset[i + 1] = offset[i] + layers_[i]->parameters().size();
  }

  Tensor grad = upstream;
  std::size_t i = end;
  while (i > 0) {
    --i;
    const Layer& l = *layers_[i];
    if (l.stops_gradient()) {
      // Everything before the stop receives exactly zero gradient.
      if (need_input_grad) grads.input = Tensor(input_shape_);
      return grads;
    }
    const Tensor& out = (i + 1 < layers_.size()) ? pass.inputs[i + 1] : pass.output;
    std::span<Tensor> pg(grads.params.data() + offset[i], offset[i + 1] - offset[i]);
    const bool want_input = i > 0 || need_input_grad;
    grad = l.backward(pass.inputs[i], out, pass.aux[i], grad, pg, want_input);
  }
  if (need_input_grad) grads.input = std::move(grad);
  return grads;
}

nlohmann::json Network::manifest() const {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : layers_) {
    nlohmann::json entry = l->config();
    nlohmann::json params = nlohmann::json::array();
    for (const Parameter& p : std::as_const(*l).parameters()) {
      params.push_back({{"name", p.name}, {"shape", p.value.shape()}});
    }
    entry["parameters"] = std::move(params);
    layers.push_back(std::move(entry));
  }
  return {{"name", name_}, {"input_shape", input_shape_}, {"layers", std::move(layers)}};
}

Network Network::from_manifest(const nlohmann::json& manifest) {
  Network net(manifest.at("name").get<std::string>(),
              manifest.at("input_shape").get<Tensor::Shape>());
  for (const auto& entry : manifest.at("layers")) {
    auto layer = layer_from_config(entry);
    const auto& params = entry.at("parameters");
    const auto own = std::as_const(*layer).parameters();
    if (params.size() != own.size()) {
      throw InvalidArgument("layer manifest parameter count mismatch for " + layer->kind());
    }
    for (std::size_t k = 0; k < own.size(); ++k) {
      if (params[k].at("shape").get<Tensor::Shape>() != own[k].value.shape()) {
        throw InvalidArgument("layer manifest parameter shape mismatch for " + layer->kind());
      }
    }
    net.add(std::move(layer));
  }
  return net;
}

LossGrad cross_entropy(const Tensor& probabilities, std::size_t target) {
  if (probabilities.rank() != 1 || target >= probabilities.size()) {
    throw InvalidArgument("cross_entropy: target " + std::to_string(target) +
                          " outside " + std::to_string(probabilities.size()) + " classes");
  }
  LossGrad out;
  out.loss = -std::log(std::max(probabilities[target], 1e-300));
  out.grad = probabilities;
  out.grad[target] -= 1.0;
  return out;
}

LossGrad binary_cross_entropy(const Tensor& probability, double target, double weight) {
  if (probability.size() != 1) throw InvalidArgument("binary_cross_entropy: expected one output");
  if (target != 0.0 && target != 1.0) throw InvalidArgument("binary_cross_entropy: target must be 0 or 1");
  const double p = std::clamp(probability[0], 1e-300, 1.0);
  const double q = std::clamp(1.0 - probability[0], 1e-300, 1.0);
  LossGrad out;
  out.loss = -weight * (target * std::log(p) + (1.0 - target) * std::log(q));
  out.grad = Tensor({1}, {weight * (probability[0] - target)});
  return out;
}

}  // namespace mmdrive::nn
