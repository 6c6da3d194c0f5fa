#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "nnkgc/autodiff/adamw.hpp"
#include "nnkgc/autodiff/tensor.hpp"
#include "nnkgc/kg/neighborhood.hpp"
#include "nnkgc/seed.hpp"

namespace nnkgc::vgae {

inline constexpr double kDefaultMaskRatio = 0.15;
inline constexpr double kLogSigmaBound = 10.0;

using NodePair = std::pair<std::size_t, std::size_t>;

struct EdgeMask {
  std::vector<NodePair> positives;  // directed edges removed from A
  std::vector<NodePair> negatives;  // pairs absent from A_sym, never i == j
  double ratio = kDefaultMaskRatio;
  std::uint64_t seed = 0;

  bool empty() const noexcept { return positives.empty(); }
};

struct MaskedAdjacency {
  kg::DenseAdjacency visible;
  EdgeMask mask;
};

// Removes ⌈ρ·|E|⌉ directed edges chosen uniformly at random, together with
// their reverse direction when present, and samples as many negatives from
// the non-edges of A_sym. Returns nullopt for an edgeless adjacency. When the
// graph is too dense to supply enough negatives, all available ones are used.
std::optional<MaskedAdjacency> mask_edges(const kg::DenseAdjacency& a, double ratio,
                                          std::uint64_t seed);

struct VgaeState {
  ad::Tensor mu;         // n × d_z
  ad::Tensor log_sigma;  // n × d_z, clamped to ±kLogSigmaBound
};

struct EdgeLoss {
  ad::Tensor total;  // bce + kl
  double bce = 0.0;
  double kl = 0.0;
  bool skipped = false;
};

class VgaeAux {
 public:
  // d_z = 0 picks d / 2.
  VgaeAux(std::size_t dim, std::size_t latent_dim, Rng& rng);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t latent_dim() const noexcept { return latent_; }

  VgaeState encode(const ad::Tensor& x, const kg::DenseAdjacency& visible) const;
  std::vector<ad::Parameter> parameters() const;

  // Direct access for tests.
  ad::Tensor& shared_weight() noexcept { return w_shared_; }
  ad::Tensor& mu_weight() noexcept { return w_mu_; }
  ad::Tensor& log_sigma_weight() noexcept { return w_sigma_; }

 private:
  std::size_t dim_;
  std::size_t latent_;
  ad::Tensor w_shared_;
  ad::Tensor w_mu_;
  ad::Tensor w_sigma_;
};

// n × d_z standard normal noise from the given seed.
ad::Tensor sample_noise(std::size_t rows, std::size_t cols, std::uint64_t seed);

// Z = mu + exp(log_sigma) ⊙ ε.
ad::Tensor reparameterize(const VgaeState& state, const ad::Tensor& eps);
ad::Tensor reparameterize(const VgaeState& state, std::uint64_t seed);

// sigmoid(z_i · z_j).
double decode_edge(const ad::Tensor& z, std::size_t i, std::size_t j);
// Logits z_i · z_j for each pair, as a column vector.
ad::Tensor pair_logits(const ad::Tensor& z, const std::vector<NodePair>& pairs);

// Mean binary cross-entropy over positives (label 1) and negatives (label 0),
// plus β · mean over nodes of KL(N(mu, σ²) ‖ N(0, I)). β ≤ 0 picks 1 / n.
EdgeLoss edge_loss(const VgaeState& state, const ad::Tensor& z, const EdgeMask& mask,
                   double beta = 0.0);

// Fraction of positives scored above 0.5 and negatives below.
double reconstruction_accuracy(const ad::Tensor& z, const EdgeMask& mask);

}  // namespace nnkgc::vgae
