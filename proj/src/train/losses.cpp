#include "nnkgc/train/losses.hpp"

#include <cmath>
#include <string>

#include "nnkgc/errors.hpp"

namespace nnkgc::train {

InfoNceResult info_nce_loss(const ad::Tensor& e_hr, const ad::Tensor& e_t,
                            const ad::Tensor& inv_temperature, const ad::Mask* negatives) {
  if (e_hr.shape() != e_t.shape())
    throw DimensionError("info_nce_loss: " + e_hr.shape_string() + " vs " + e_t.shape_string());
  const std::size_t b = e_hr.rows();
  if (b < 2) throw ContractError("info_nce_loss: batch of " + std::to_string(b) + " has no negatives");
  if (negatives && (negatives->rows != b || negatives->cols != b))
    throw DimensionError("info_nce_loss: negatives mask does not match batch");

  std::vector<bool> zero_hr, zero_t;
  const ad::Tensor s = ad::scale_by(
      ad::matmul(ad::l2_normalize_rows(e_hr, &zero_hr), ad::transpose(ad::l2_normalize_rows(e_t, &zero_t))),
      inv_temperature);
  const ad::Tensor logp = ad::log_softmax_rows(s, negatives);

  InfoNceResult out;
  std::vector<std::size_t> diag, kept;
  for (std::size_t i = 0; i < b; ++i) {
    diag.push_back(i);
    if (zero_hr[i] || zero_t[i]) {
      out.skipped.push_back(i);
    } else {
      kept.push_back(i);
    }
  }
  if (kept.empty()) {
    out.loss = ad::Tensor::scalar(0.0);
    return out;
  }
  ad::Tensor picked = ad::pick_per_row(logp, diag);
  if (kept.size() != b) picked = ad::gather_rows(picked, kept);
  out.loss = ad::scale(ad::mean(picked), -1.0);
  return out;
}

InfoNceResult info_nce_loss(const ad::Tensor& e_hr, const ad::Tensor& e_t, double temperature) {
  if (!(temperature > 0.0)) throw ConfigError("temperature must be positive");
  return info_nce_loss(e_hr, e_t, ad::Tensor::scalar(1.0 / temperature));
}

ad::Tensor inverse_temperature(const ad::Tensor& log_inv_tau) {
  return ad::exp(ad::clamp(log_inv_tau, std::log(1.0 / kMaxTemperature),
                           std::log(1.0 / kMinTemperature)));
}

void check_lambda(double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0))
    throw ConfigError("lambda must lie in [0, 1], got " + std::to_string(lambda));
}

ad::Tensor combined_loss(const ad::Tensor& l_kg, const ad::Tensor& l_edge, double lambda) {
  check_lambda(lambda);
  return ad::add(ad::scale(l_kg, lambda), ad::scale(l_edge, 1.0 - lambda));
}

double combined_loss(double l_kg, double l_edge, double lambda) {
  check_lambda(lambda);
  return lambda * l_kg + (1.0 - lambda) * l_edge;
}

}  // namespace nnkgc::train
