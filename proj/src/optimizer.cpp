#include "mmdrive/nn/optimizer.hpp"

#include <cmath>
#include <string>

#include "mmdrive/error.hpp"

namespace mmdrive::nn {

void Adam::step(std::span<Parameter* const> params, std::span<const Tensor> grads) {
  if (params.size() != grads.size()) {
    throw InvalidArgument("Adam: " + std::to_string(params.size()) + " parameters but " +
                          std::to_string(grads.size()) + " gradients");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i].shape() != params[i]->value.shape()) {
      throw InvalidArgument("Adam: gradient shape mismatch for parameter '" + params[i]->name + "'");
    }
    if (!grads[i].all_finite()) {
      throw InvalidArgument("Adam: non-finite gradient for parameter '" + params[i]->name + "'");
    }
  }
  if (m_.empty()) {
    for (Parameter* p : params) {
      m_.emplace_back(p->value.shape());
      v_.emplace_back(p->value.shape());
    }
  } else if (m_.size() != params.size()) {
    throw InvalidState("Adam: parameter list changed between steps");
  }

  ++t_;
  const double c1 = 1.0 - std::pow(hyper_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(hyper_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    double* w = params[i]->value.data();
    const double* g = grads[i].data();
    double* m = m_[i].data();
    double* v = v_[i].data();
    for (std::size_t k = 0, n = grads[i].size(); k < n; ++k) {
      m[k] = hyper_.beta1 * m[k] + (1.0 - hyper_.beta1) * g[k];
      v[k] = hyper_.beta2 * v[k] + (1.0 - hyper_.beta2) * g[k] * g[k];
      const double m_hat = m[k] / c1;
      const double v_hat = v[k] / c2;
      w[k] -= hyper_.lr * m_hat / (std::sqrt(v_hat) + hyper_.eps);
    }
  }
}

}  // namespace mmdrive::nn
