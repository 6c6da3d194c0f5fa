#pragma once

#include <functional>
#include <string>
#include <vector>

#include "nnkgc/autodiff/ops.hpp"
#include "test_util.hpp"

namespace nnkgc::testing {

struct GradCase {
  std::string name;
  ad::Tensor input;
  std::function<ad::Tensor(const ad::Tensor&)> loss;
};

// One scalar-valued probe per autodiff primitive. A fixed random weighting
// makes every output entry matter.
inline std::vector<GradCase> primitive_cases() {
  using namespace ad;
  const Tensor w34 = random_tensor(3, 4, 101, false);
  const Tensor w33 = random_tensor(3, 3, 102, false);
  const Tensor w44 = random_tensor(4, 4, 103, false);
  const Tensor b43 = random_tensor(4, 3, 104, false);
  const Tensor row4 = random_tensor(1, 4, 105, false);
  const Tensor col3 = random_tensor(3, 1, 106, false);
  const Tensor col4 = random_tensor(4, 1, 107, false);
  const Tensor w38 = random_tensor(3, 8, 108, false);
  const Tensor w24 = random_tensor(2, 4, 109, false);
  auto weigh = [](const Tensor& y, const Tensor& w) { return sum(hadamard(y, w)); };

  Mask mask = Mask::all(3, 4);
  mask.set(0, 1, false);
  mask.set(2, 3, false);

  std::vector<GradCase> c;
  c.push_back({"matmul(left)", random_tensor(3, 4, 1), [=](const Tensor& x) { return weigh(matmul(x, b43), w33); }});
  c.push_back({"matmul(right)", random_tensor(4, 3, 2), [=](const Tensor& x) { return weigh(matmul(w34, x), w33); }});
  c.push_back({"transpose", random_tensor(4, 3, 3), [=](const Tensor& x) { return weigh(transpose(x), w34); }});
  c.push_back({"add", random_tensor(3, 4, 4), [=](const Tensor& x) { return weigh(add(x, w34), w34); }});
  c.push_back({"sub", random_tensor(3, 4, 5), [=](const Tensor& x) { return weigh(sub(w34, x), w34); }});
  c.push_back({"hadamard", random_tensor(3, 4, 6), [=](const Tensor& x) { return sum(hadamard(x, x)); }});
  c.push_back({"scale", random_tensor(3, 4, 7), [=](const Tensor& x) { return weigh(scale(x, -1.7), w34); }});
  c.push_back({"scale_by", random_tensor(1, 1, 8), [=](const Tensor& s) { return weigh(scale_by(w34, s), w34); }});
  c.push_back({"add_row", random_tensor(1, 4, 9), [=](const Tensor& r) { return weigh(add_row(w34, r), w34); }});
  c.push_back({"relu", away_from_zero(3, 4, 10), [=](const Tensor& x) { return weigh(relu(x), w34); }});
  c.push_back({"leaky_relu", away_from_zero(3, 4, 11), [=](const Tensor& x) { return weigh(leaky_relu(x), w34); }});
  c.push_back({"sigmoid", random_tensor(3, 4, 12, true, -3, 3), [=](const Tensor& x) { return weigh(sigmoid(x), w34); }});
  c.push_back({"tanh", random_tensor(3, 4, 13), [=](const Tensor& x) { return weigh(tanh(x), w34); }});
  c.push_back({"exp", random_tensor(3, 4, 14), [=](const Tensor& x) { return weigh(exp(x), w34); }});
  c.push_back({"log", random_tensor(3, 4, 15, true, 0.3, 2.0), [=](const Tensor& x) { return weigh(log(x), w34); }});
  c.push_back({"softplus", random_tensor(3, 4, 16, true, -4, 4), [=](const Tensor& x) { return weigh(softplus(x), w34); }});
  c.push_back({"clamp", random_tensor(3, 4, 17, true, -2, 2), [=](const Tensor& x) {
                 // Keep inputs away from the clamp bounds.
                 return weigh(clamp(x, -2.5, 2.5), w34);
               }});
  c.push_back({"softmax_rows", random_tensor(3, 4, 18), [=](const Tensor& x) { return weigh(softmax_rows(x), w34); }});
  c.push_back({"softmax_rows(masked)", random_tensor(3, 4, 19), [=](const Tensor& x) {
                 return weigh(softmax_rows(x, &mask), w34);
               }});
  c.push_back({"log_softmax_rows", random_tensor(3, 4, 20), [=](const Tensor& x) { return weigh(log_softmax_rows(x), w34); }});
  c.push_back({"log_softmax_rows(masked)", random_tensor(3, 4, 21), [=](const Tensor& x) {
                 return weigh(log_softmax_rows(x, &mask), w34);
               }});
  c.push_back({"sum", random_tensor(3, 4, 22), [=](const Tensor& x) { return sum(hadamard(x, w34)); }});
  c.push_back({"mean", random_tensor(3, 4, 23), [=](const Tensor& x) { return mean(hadamard(x, x)); }});
  c.push_back({"mean_rows", random_tensor(3, 4, 24), [=](const Tensor& x) { return weigh(mean_rows(x), row4); }});
  c.push_back({"sum_cols", random_tensor(3, 4, 25), [=](const Tensor& x) { return weigh(sum_cols(x), col3); }});
  c.push_back({"concat_cols", random_tensor(3, 4, 26), [=](const Tensor& x) {
                 const Tensor parts[] = {x, w34, x};
                 return weigh(concat_cols(parts), random_tensor(3, 12, 201, false));
               }});
  c.push_back({"concat_rows", random_tensor(3, 4, 27), [=](const Tensor& x) {
                 const Tensor parts[] = {x, row4, x};
                 return weigh(concat_rows(parts), random_tensor(7, 4, 202, false));
               }});
  c.push_back({"gather_rows", random_tensor(3, 4, 28), [=](const Tensor& x) {
                 const std::size_t rows[] = {2, 0, 2, 1};
                 return weigh(gather_rows(x, rows), w44);
               }});
  c.push_back({"slice_cols", random_tensor(3, 8, 29), [=](const Tensor& x) { return weigh(slice_cols(x, 2, 4), w34); }});
  c.push_back({"pick_per_row", random_tensor(3, 4, 30), [=](const Tensor& x) {
                 const std::size_t idx[] = {3, 0, 2};
                 return weigh(pick_per_row(x, idx), col3);
               }});
  c.push_back({"l2_normalize_rows", random_tensor(3, 4, 31), [=](const Tensor& x) {
                 return weigh(l2_normalize_rows(x), w34);
               }});
  c.push_back({"outer_sum(left)", random_tensor(3, 1, 32), [=](const Tensor& a) { return weigh(outer_sum(a, col4), w34); }});
  c.push_back({"outer_sum(right)", random_tensor(4, 1, 33), [=](const Tensor& b) { return weigh(outer_sum(col3, b), w34); }});
  c.push_back({"embedding_bag_mean", random_tensor(5, 4, 34), [=](const Tensor& t) {
                 const std::size_t ids[] = {0, 3, 3, 1, 4, 2, 0};
                 const std::size_t offsets[] = {0, 3, 4, 7};
                 return weigh(embedding_bag_mean(t, ids, offsets), w34);
               }});
  c.push_back({"layer_norm_rows", random_tensor(3, 8, 35), [=](const Tensor& x) {
                 return weigh(layer_norm_rows(x), w38);
               }});
  c.push_back({"dropout", random_tensor(2, 4, 36), [=](const Tensor& x) {
                 Rng rng(9);  // same mask on every evaluation
                 return weigh(dropout(x, 0.3, rng), w24);
               }});
  return c;
}

}  // namespace nnkgc::testing
