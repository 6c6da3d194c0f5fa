#pragma once

#include <functional>

#include "nnkgc/autodiff/tensor.hpp"

namespace nnkgc::ad {

// Compares the reverse-mode gradient of f at x against central differences
// (f(x+εeᵢ) − f(x−εeᵢ)) / 2ε. Returns max_i |analytic − numeric| / max(1, |numeric|).
//
// x must be a leaf with requires_grad; its values are restored on return and
// its gradient buffer is left holding the analytic gradient.
double finite_diff_check(const std::function<Tensor(const Tensor&)>& f, Tensor x, double eps = 1e-6);

// Variant for closures over a model: `loss` reads x implicitly (x is one of
// the model's parameters).
double finite_diff_check(const std::function<Tensor()>& loss, Tensor x, double eps = 1e-6);

}  // namespace nnkgc::ad
