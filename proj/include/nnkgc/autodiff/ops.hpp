#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "nnkgc/autodiff/tensor.hpp"
#include "nnkgc/seed.hpp"

namespace nnkgc::ad {

inline constexpr double kDefaultLeakySlope = 0.2;

// Boolean keep-mask for softmax_rows; keep(i, j) == false sends entry (i, j) to probability 0.
struct Mask {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint8_t> keep;

  static Mask all(std::size_t rows, std::size_t cols) {
    return Mask{rows, cols, std::vector<std::uint8_t>(rows * cols, 1)};
  }
  bool operator()(std::size_t r, std::size_t c) const { return keep[r * cols + c] != 0; }
  void set(std::size_t r, std::size_t c, bool on) { keep[r * cols + c] = on ? 1 : 0; }
};

// Linear algebra.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& x);

// Binary elementwise; shapes must match exactly.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor hadamard(const Tensor& a, const Tensor& b);
inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }

Tensor scale(const Tensor& x, double factor);
// x * s where s is a 1×1 tensor (learnable scalars such as inverse temperature).
Tensor scale_by(const Tensor& x, const Tensor& s);
// Adds a 1×n row to every row of an m×n tensor.
Tensor add_row(const Tensor& x, const Tensor& row);

// Unary elementwise.
Tensor relu(const Tensor& x);
Tensor leaky_relu(const Tensor& x, double slope = kDefaultLeakySlope);
Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);
// log(1 + e^x), computed without overflow.
Tensor softplus(const Tensor& x);
// Gradient passes where lo <= x <= hi and is zero outside.
Tensor clamp(const Tensor& x, double lo, double hi);

// Row-wise softmax with row-max subtraction. Masked entries get exactly 0.
Tensor softmax_rows(const Tensor& x, const Mask* mask = nullptr);
// Row-wise log-softmax; masked entries are set to 0 and receive no gradient.
Tensor log_softmax_rows(const Tensor& x, const Mask* mask = nullptr);

// Reductions and shaping.
Tensor sum(const Tensor& x);                 // -> 1×1
Tensor mean(const Tensor& x);                // -> 1×1
Tensor mean_rows(const Tensor& x);           // m×n -> 1×n, averages over rows
Tensor sum_cols(const Tensor& x);            // m×n -> m×1, sums each row
Tensor concat_cols(std::span<const Tensor> parts);
Tensor concat_rows(std::span<const Tensor> parts);
Tensor gather_rows(const Tensor& x, std::span<const std::size_t> rows);
Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t count);
// out(i) = x(i, index[i]) -> m×1
Tensor pick_per_row(const Tensor& x, std::span<const std::size_t> index);
// Zero rows are returned unchanged; zero_rows (when given) receives one flag per row.
Tensor l2_normalize_rows(const Tensor& x, std::vector<bool>* zero_rows = nullptr);
// out(i, j) = a(i) + b(j) for column vectors a (m×1) and b (n×1).
Tensor outer_sum(const Tensor& a, const Tensor& b);
// Row i = mean of table rows ids[offsets[i] .. offsets[i+1]). Every segment
// must be non-empty. The backward pass scatters into the table rows used.
Tensor embedding_bag_mean(const Tensor& table, std::span<const std::size_t> ids,
                          std::span<const std::size_t> offsets);
// Per-row standardization (no affine part).
Tensor layer_norm_rows(const Tensor& x, double eps = 1e-5);
// Inverted dropout: kept entries are scaled by 1/(1-p). p == 0 returns x.
Tensor dropout(const Tensor& x, double p, Rng& rng);

}  // namespace nnkgc::ad
