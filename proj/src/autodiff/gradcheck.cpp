#include "nnkgc/autodiff/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "nnkgc/errors.hpp"

namespace nnkgc::ad {

double finite_diff_check(const std::function<Tensor()>& loss, Tensor x, double eps) {
  if (!(eps > 0.0)) throw ContractError("finite_diff_check: eps must be positive");
  if (!x.requires_grad()) throw ContractError("finite_diff_check: x must require grad");

  x.zero_grad();
  loss().backward();
  const std::vector<double> analytic(x.grad().begin(), x.grad().end());

  NoGradGuard no_grad;
  auto values = x.mutable_values();
  double worst = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double original = values[i];
    values[i] = original + eps;
    const double up = loss().item();
    values[i] = original - eps;
    const double down = loss().item();
    values[i] = original;
    const double numeric = (up - down) / (2.0 * eps);
    const double err = std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(numeric));
    worst = std::max(worst, err);
  }
  return worst;
}

double finite_diff_check(const std::function<Tensor(const Tensor&)>& f, Tensor x, double eps) {
  return finite_diff_check([&f, &x]() { return f(x); }, x, eps);
}

}  // namespace nnkgc::ad
