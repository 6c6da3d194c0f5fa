#include "nnkgc/autodiff/adamw.hpp"

#include <cmath>

#include "nnkgc/errors.hpp"

namespace nnkgc::ad {

AdamW::AdamW(std::vector<Parameter> params, AdamWOptions options)
    : params_(std::move(params)), options_(options) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const Parameter& p : params_) {
    m_.emplace_back(p.tensor.size(), 0.0);
    v_.emplace_back(p.tensor.size(), 0.0);
  }
}

void AdamW::step() {
  for (const Parameter& p : params_) {
    if (!p.tensor.has_grad()) throw ContractError("adamw: parameter '" + p.name + "' has no gradient");
  }
  ++step_;
  const double t = static_cast<double>(step_);
  const double bias1 = 1.0 - std::pow(options_.beta1, t);
  const double bias2 = 1.0 - std::pow(options_.beta2, t);
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Tensor& tensor = params_[k].tensor;
    auto theta = tensor.mutable_values();
    auto grad = tensor.grad();
    auto& m = m_[k];
    auto& v = v_[k];
    const double decay = params_[k].decay ? options_.lr * options_.weight_decay : 0.0;
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double g = grad[i];
      theta[i] -= decay * theta[i];
      m[i] = options_.beta1 * m[i] + (1.0 - options_.beta1) * g;
      v[i] = options_.beta2 * v[i] + (1.0 - options_.beta2) * g * g;
      const double m_hat = m[i] / bias1;
      const double v_hat = v[i] / bias2;
      theta[i] -= options_.lr * m_hat / (std::sqrt(v_hat) + options_.epsilon);
    }
  }
}

void AdamW::zero_grad() {
  for (Parameter& p : params_) p.tensor.zero_grad();
}

}  // namespace nnkgc::ad
