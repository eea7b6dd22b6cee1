#include "mmdrive/nn/layers.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <string>

#include "mmdrive/error.hpp"

namespace mmdrive::nn {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using MapConstMat = Eigen::Map<const RowMat>;
using MapVec = Eigen::Map<Eigen::VectorXd>;
using MapConstVec = Eigen::Map<const Eigen::VectorXd>;

void he_uniform(Tensor& t, std::size_t fan_in, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
  std::uniform_real_distribution<double> u(-limit, limit);
  for (double& v : t.storage()) v = u(rng);
}

void require_rank(const Tensor::Shape& in, std::size_t rank, const std::string& who) {
  if (in.size() != rank) {
    throw InvalidArgument(who + ": expected rank-" + std::to_string(rank) + " input, got " +
                          shape_to_string(in));
  }
}

struct ConvGeometry {
  std::size_t in_h, in_w, out_h, out_w;
  std::size_t pad_top, pad_left;
};

ConvGeometry geometry(const Tensor::Shape& in, int kh, int kw, Padding padding) {
  ConvGeometry g{};
  g.in_h = in[0];
  g.in_w = in[1];
  if (padding == Padding::Same) {
    g.out_h = g.in_h;
    g.out_w = g.in_w;
    g.pad_top = static_cast<std::size_t>((kh - 1) / 2);
    g.pad_left = static_cast<std::size_t>((kw - 1) / 2);
  } else {
    g.out_h = g.in_h - static_cast<std::size_t>(kh) + 1;
    g.out_w = g.in_w - static_cast<std::size_t>(kw) + 1;
    g.pad_top = g.pad_left = 0;
  }
  return g;
}

}  // namespace

// --- Conv2D -----------------------------------------------------------------

Conv2D::Conv2D(int kernel_h, int kernel_w, int in_channels, int out_channels, Padding padding)
    : kh_(kernel_h), kw_(kernel_w), cin_(in_channels), cout_(out_channels), padding_(padding) {
  if (kh_ < 1 || kw_ < 1 || cin_ < 1 || cout_ < 1) {
    throw InvalidArgument("Conv2D: kernel and channel counts must be positive");
  }
  const auto kh = static_cast<std::size_t>(kh_), kw = static_cast<std::size_t>(kw_);
  const auto ci = static_cast<std::size_t>(cin_), co = static_cast<std::size_t>(cout_);
  params_.push_back({"weight", Tensor({kh, kw, ci, co})});
  params_.push_back({"bias", Tensor({co})});
}

Tensor::Shape Conv2D::output_shape(const Tensor::Shape& in) const {
  require_rank(in, 3, "Conv2D");
  if (in[2] != static_cast<std::size_t>(cin_)) {
    throw InvalidArgument("Conv2D: expected " + std::to_string(cin_) + " input channels, got " +
                          shape_to_string(in));
  }
  if (padding_ == Padding::Valid &&
      (in[0] < static_cast<std::size_t>(kh_) || in[1] < static_cast<std::size_t>(kw_))) {
    throw InvalidArgument("Conv2D: valid " + std::to_string(kh_) + "x" + std::to_string(kw_) +
                          " kernel does not fit input " + shape_to_string(in));
  }
  const ConvGeometry g = geometry(in, kh_, kw_, padding_);
  return {g.out_h, g.out_w, static_cast<std::size_t>(cout_)};
}

void Conv2D::initialize(std::mt19937_64& rng) {
  he_uniform(params_[0].value, static_cast<std::size_t>(kh_ * kw_ * cin_), rng);
  params_[1].value.fill(0.0);
}

Tensor Conv2D::forward(const Tensor& in, Tensor& aux, const ForwardContext&) const {
  const Tensor::Shape out_shape = output_shape(in.shape());
  const ConvGeometry g = geometry(in.shape(), kh_, kw_, padding_);
  const std::size_t ci = static_cast<std::size_t>(cin_);
  const std::size_t k = static_cast<std::size_t>(kh_ * kw_) * ci;
  const std::size_t p = g.out_h * g.out_w;

  // im2col: one row per output pixel, (kh, kw, cin) along the row.
  aux = Tensor({p, k});
  double* cols = aux.data();
  const double* src = in.data();
  for (std::size_t oh = 0; oh < g.out_h; ++oh) {
    for (std::size_t ow = 0; ow < g.out_w; ++ow) {
      double* row = cols + (oh * g.out_w + ow) * k;
      for (int a = 0; a < kh_; ++a) {
        const auto ih = static_cast<std::ptrdiff_t>(oh + a) - static_cast<std::ptrdiff_t>(g.pad_top);
        for (int b = 0; b < kw_; ++b) {
          const auto iw = static_cast<std::ptrdiff_t>(ow + b) - static_cast<std::ptrdiff_t>(g.pad_left);
          double* dst = row + (static_cast<std::size_t>(a * kw_ + b)) * ci;
          if (ih < 0 || iw < 0 || ih >= static_cast<std::ptrdiff_t>(g.in_h) ||
              iw >= static_cast<std::ptrdiff_t>(g.in_w)) {
            std::fill(dst, dst + ci, 0.0);
          } else {
            std::copy_n(src + (static_cast<std::size_t>(ih) * g.in_w + static_cast<std::size_t>(iw)) * ci, ci, dst);
          }
        }
      }
    }
  }

  Tensor out(out_shape);
  const auto co = static_cast<Eigen::Index>(cout_);
  MapConstMat c(cols, static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(k));
  MapConstMat w(params_[0].value.data(), static_cast<Eigen::Index>(k), co);
  MapConstVec bias(params_[1].value.data(), co);
  MapMat y(out.data(), static_cast<Eigen::Index>(p), co);
  y.noalias() = c * w;
  y.rowwise() += bias.transpose();
  return out;
}

Tensor Conv2D::backward(const Tensor& in, const Tensor&, const Tensor& aux, const Tensor& grad_out,
                        std::span<Tensor> param_grads, bool need_input_grad) const {
  const ConvGeometry g = geometry(in.shape(), kh_, kw_, padding_);
  const std::size_t ci = static_cast<std::size_t>(cin_);
  const std::size_t k = static_cast<std::size_t>(kh_ * kw_) * ci;
  const std::size_t p = g.out_h * g.out_w;
  const auto co = static_cast<Eigen::Index>(cout_);

  MapConstMat c(aux.data(), static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(k));
  MapConstMat dy(grad_out.data(), static_cast<Eigen::Index>(p), co);
  MapMat dw(param_grads[0].data(), static_cast<Eigen::Index>(k), co);
  MapVec db(param_grads[1].data(), co);
  dw.noalias() += c.transpose() * dy;
  db += dy.colwise().sum().transpose();

  if (!need_input_grad) return {};

  RowMat dcols = dy * MapConstMat(params_[0].value.data(), static_cast<Eigen::Index>(k), co).transpose();
  Tensor grad_in(in.shape());
  double* gi = grad_in.data();
  for (std::size_t oh = 0; oh < g.out_h; ++oh) {
    for (std::size_t ow = 0; ow < g.out_w; ++ow) {
      const double* row = dcols.data() + (oh * g.out_w + ow) * k;
      for (int a = 0; a < kh_; ++a) {
        const auto ih = static_cast<std::ptrdiff_t>(oh + a) - static_cast<std::ptrdiff_t>(g.pad_top);
        if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(g.in_h)) continue;
        for (int b = 0; b < kw_; ++b) {
          const auto iw = static_cast<std::ptrdiff_t>(ow + b) - static_cast<std::ptrdiff_t>(g.pad_left);
          if (iw < 0 || iw >= static_cast<std::ptrdiff_t>(g.in_w)) continue;
          const double* s = row + static_cast<std::size_t>(a * kw_ + b) * ci;
          double* d = gi + (static_cast<std::size_t>(ih) * g.in_w + static_cast<std::size_t>(iw)) * ci;
          for (std::size_t x = 0; x < ci; ++x) d[x] += s[x];
        }
      }
    }
  }
  return grad_in;
}

nlohmann::json Conv2D::config() const {
  return {{"kind", kind()},
          {"kernel_h", kh_},
          {"kernel_w", kw_},
          {"in_channels", cin_},
          {"out_channels", cout_},
          {"padding", padding_ == Padding::Same ? "same" : "valid"}};
}

// --- Dense --------------------------------------------------------------------

Dense::Dense(int in, int out) : in_(in), out_(out) {
  if (in_ < 1 || out_ < 1) throw InvalidArgument("Dense: sizes must be positive");
  params_.push_back({"weight", Tensor({static_cast<std::size_t>(in_), static_cast<std::size_t>(out_)})});
  params_.push_back({"bias", Tensor({static_cast<std::size_t>(out_)})});
}

Tensor::Shape Dense::output_shape(const Tensor::Shape& in) const {
  if (shape_size(in) != static_cast<std::size_t>(in_) || in.empty()) {
    throw InvalidArgument("Dense: expected " + std::to_string(in_) + " inputs, got " +
                          shape_to_string(in));
  }
  return {static_cast<std::size_t>(out_)};
}

void Dense::initialize(std::mt19937_64& rng) {
  he_uniform(params_[0].value, static_cast<std::size_t>(in_), rng);
  params_[1].value.fill(0.0);
}

Tensor Dense::forward(const Tensor& in, Tensor&, const ForwardContext&) const {
  Tensor out(output_shape(in.shape()));
  MapConstVec x(in.data(), in_);
  MapConstMat w(params_[0].value.data(), in_, out_);
  MapVec y(out.data(), out_);
  y.noalias() = w.transpose() * x;
  y += MapConstVec(params_[1].value.data(), out_);
  return out;
}

Tensor Dense::backward(const Tensor& in, const Tensor&, const Tensor&, const Tensor& grad_out,
                       std::span<Tensor> param_grads, bool need_input_grad) const {
  MapConstVec x(in.data(), in_);
  MapConstVec dy(grad_out.data(), out_);
  MapMat dw(param_grads[0].data(), in_, out_);
  dw.noalias() += x * dy.transpose();
  MapVec(param_grads[1].data(), out_) += dy;
  if (!need_input_grad) return {};
  Tensor grad_in(in.shape());
  MapVec(grad_in.data(), in_).noalias() = MapConstMat(params_[0].value.data(), in_, out_) * dy;
  return grad_in;
}

nlohmann::json Dense::config() const {
  return {{"kind", kind()}, {"in", in_}, {"out", out_}};
}

// --- Elementwise and pooling ---------------------------------------------------

Tensor ReLU::forward(const Tensor& in, Tensor&, const ForwardContext&) const {
  Tensor out = in;
  for (double& v : out.storage()) v = v > 0.0 ? v : 0.0;
  return out;
}

Tensor ReLU::backward(const Tensor& in, const Tensor&, const Tensor&, const Tensor& grad_out,
                      std::span<Tensor>, bool need_input_grad) const {
  if (!need_input_grad) return {};
  Tensor g = grad_out;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!(in[i] > 0.0)) g[i] = 0.0;
  }
  return g;
}

Tensor Sigmoid::forward(const Tensor& in, Tensor&, const ForwardContext&) const {
  Tensor out = in;
  for (double& v : out.storage()) {
    v = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
  }
  return out;
}

Tensor Sigmoid::backward(const Tensor&, const Tensor& out, const Tensor&, const Tensor& grad_out,
                         std::span<Tensor>, bool need_input_grad) const {
  if (!need_input_grad) return {};
  Tensor g = grad_out;
  for (std::size_t i = 0; i < g.size(); ++i) g[i] *= out[i] * (1.0 - out[i]);
  return g;
}

Tensor::Shape GlobalAvgPool::output_shape(const Tensor::Shape& in) const {
  require_rank(in, 3, "GlobalAvgPool");
  if (in[0] * in[1] == 0) throw InvalidArgument("GlobalAvgPool: empty spatial extent");
  return {in[2]};
}

Tensor GlobalAvgPool::forward(const Tensor& in, Tensor&, const ForwardContext&) const {
  Tensor out(output_shape(in.shape()));
  const std::size_t pixels = in.dim(0) * in.dim(1);
  const std::size_t c = in.dim(2);
  MapVec y(out.data(), static_cast<Eigen::Index>(c));
  y = MapConstMat(in.data(), static_cast<Eigen::Index>(pixels), static_cast<Eigen::Index>(c))
          .colwise()
          .sum()
          .transpose();
  y /= static_cast<double>(pixels);
  return out;
}

Tensor GlobalAvgPool::backward(const Tensor& in, const Tensor&, const Tensor&,
                               const Tensor& grad_out, std::span<Tensor>,
                               bool need_input_grad) const {
  if (!need_input_grad) return {};
  const std::size_t pixels = in.dim(0) * in.dim(1);
  const std::size_t c = in.dim(2);
  Tensor g(in.shape());
  const double scale = 1.0 / static_cast<double>(pixels);
  for (std::size_t p = 0; p < pixels; ++p) {
    for (std::size_t k = 0; k < c; ++k) g[p * c + k] = grad_out[k] * scale;
  }
  return g;
}

Dropout::Dropout(double rate) : rate_(rate) {
  if (!(rate >= 0.0 && rate < 1.0)) throw InvalidArgument("Dropout: rate must lie in [0, 1)");
}

Tensor Dropout::forward(const Tensor& in, Tensor& aux, const ForwardContext& ctx) const {
  if (ctx.mode == Mode::Eval || rate_ == 0.0) {
    aux = Tensor();
    return in;
  }
  if (ctx.rng == nullptr) throw InvalidState("Dropout: train mode requires a random engine");
  aux = Tensor(in.shape());
  std::bernoulli_distribution keep(1.0 - rate_);
  const double scale = 1.0 / (1.0 - rate_);
  Tensor out = in;
  for (std::size_t i = 0; i < out.size(); ++i) {
    aux[i] = keep(*ctx.rng) ? scale : 0.0;
    out[i] *= aux[i];
  }
  return out;
}

Tensor Dropout::backward(const Tensor&, const Tensor&, const Tensor& aux, const Tensor& grad_out,
                         std::span<Tensor>, bool need_input_grad) const {
  if (!need_input_grad) return {};
  if (aux.empty()) return grad_out;
  Tensor g = grad_out;
  for (std::size_t i = 0; i < g.size(); ++i) g[i] *= aux[i];
  return g;
}

nlohmann::json Dropout::config() const { return {{"kind", kind()}, {"rate", rate_}}; }

Tensor::Shape Softmax::output_shape(const Tensor::Shape& in) const {
  require_rank(in, 1, "Softmax");
  return in;
}

Tensor Softmax::forward(const Tensor& in, Tensor&, const ForwardContext&) const {
  output_shape(in.shape());
  Tensor out = in;
  const double m = *std::max_element(out.storage().begin(), out.storage().end());
  double sum = 0.0;
  for (double& v : out.storage()) {
    v = std::exp(v - m);
    sum += v;
  }
  for (double& v : out.storage()) v /= sum;
  return out;
}

Tensor Softmax::backward(const Tensor&, const Tensor& out, const Tensor&, const Tensor& grad_out,
                         std::span<Tensor>, bool need_input_grad) const {
  if (!need_input_grad) return {};
  double dot = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) dot += grad_out[i] * out[i];
  Tensor g(out.shape());
  for (std::size_t i = 0; i < out.size(); ++i) g[i] = out[i] * (grad_out[i] - dot);
  return g;
}

Tensor GradientStop::forward(const Tensor& in, Tensor&, const ForwardContext&) const { return in; }

Tensor GradientStop::backward(const Tensor& in, const Tensor&, const Tensor&, const Tensor&,
                              std::span<Tensor>, bool need_input_grad) const {
  if (!need_input_grad) return {};
  return Tensor(in.shape());
}

// --- Factory --------------------------------------------------------------------

std::unique_ptr<Layer> layer_from_config(const nlohmann::json& config) {
  const std::string kind = config.at("kind").get<std::string>();
  if (kind == "Conv2D") {
    const std::string pad = config.at("padding").get<std::string>();
    if (pad != "same" && pad != "valid") throw InvalidArgument("Conv2D: unknown padding " + pad);
    return std::make_unique<Conv2D>(config.at("kernel_h").get<int>(),
                                    config.at("kernel_w").get<int>(),
                                    config.at("in_channels").get<int>(),
                                    config.at("out_channels").get<int>(),
                                    pad == "same" ? Padding::Same : Padding::Valid);
  }
  if (kind == "Dense") {
    return std::make_unique<Dense>(config.at("in").get<int>(), config.at("out").get<int>());
  }
  if (kind == "ReLU") return std::make_unique<ReLU>();
  if (kind == "Sigmoid") return std::make_unique<Sigmoid>();
  if (kind == "GlobalAvgPool") return std::make_unique<GlobalAvgPool>();
  if (kind == "Dropout") return std::make_unique<Dropout>(config.at("rate").get<double>());
  if (kind == "Softmax") return std::make_unique<Softmax>();
  if (kind == "GradientStop") return std::make_unique<GradientStop>();
  throw InvalidArgument("unknown layer kind '" + kind + "'");
}

}  // namespace mmdrive::nn
