#pragma once

#include <cstddef>
#include <vector>

#include "nnkgc/autodiff/ops.hpp"
#include "nnkgc/autodiff/tensor.hpp"

namespace nnkgc::train {

inline constexpr double kMinTemperature = 0.001;
inline constexpr double kMaxTemperature = 1.0;

struct InfoNceResult {
  ad::Tensor loss;                  // 1×1
  std::vector<std::size_t> skipped;  // rows dropped because an embedding had zero norm
};

// Cosine similarity S (b×b) scaled by inv_temperature (1×1), then the mean
// over rows i of −log softmax(S)[i, i]. negatives (optional) removes
// off-diagonal entries from the softmax; the diagonal must stay unmasked.
InfoNceResult info_nce_loss(const ad::Tensor& e_hr, const ad::Tensor& e_t,
                            const ad::Tensor& inv_temperature,
                            const ad::Mask* negatives = nullptr);
InfoNceResult info_nce_loss(const ad::Tensor& e_hr, const ad::Tensor& e_t, double temperature);

// exp(log_inv_tau) with τ kept inside [kMinTemperature, kMaxTemperature].
ad::Tensor inverse_temperature(const ad::Tensor& log_inv_tau);

// λ·L_kg + (1−λ)·L_edge. Throws ConfigError unless 0 ≤ λ ≤ 1.
ad::Tensor combined_loss(const ad::Tensor& l_kg, const ad::Tensor& l_edge, double lambda);
double combined_loss(double l_kg, double l_edge, double lambda);
void check_lambda(double lambda);

}  // namespace nnkgc::train
