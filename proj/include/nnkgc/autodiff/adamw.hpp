#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "nnkgc/autodiff/tensor.hpp"

namespace nnkgc::ad {

// A trainable tensor with a stable name (used for checkpoints) and a flag
// that exempts it from weight decay.
struct Parameter {
  std::string name;
  Tensor tensor;
  bool decay = true;
};

struct AdamWOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.01;
};

// Adam with decoupled weight decay:
//   θ ← θ − lr·wd·θ
//   m ← β1·m + (1−β1)·g,  v ← β2·v + (1−β2)·g²
//   θ ← θ − lr · m̂ / (√v̂ + ε),  m̂ = m/(1−β1ᵗ), v̂ = v/(1−β2ᵗ)
class AdamW {
 public:
  AdamW(std::vector<Parameter> params, AdamWOptions options);

  // Throws ContractError if any parameter has no gradient buffer.
  void step();
  void zero_grad();

  std::size_t step_count() const noexcept { return step_; }
  const AdamWOptions& options() const noexcept { return options_; }
  void set_lr(double lr) noexcept { options_.lr = lr; }
  std::span<const double> first_moment(std::size_t i) const { return m_[i]; }
  std::span<const double> second_moment(std::size_t i) const { return v_[i]; }
  const std::vector<Parameter>& params() const noexcept { return params_; }

 private:
  std::vector<Parameter> params_;
  AdamWOptions options_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  std::size_t step_ = 0;
};

}  // namespace nnkgc::ad
