#include "nnkgc/vgae/vgae.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "nnkgc/autodiff/ops.hpp"
#include "nnkgc/errors.hpp"
#include "nnkgc/graph/graph_encoder.hpp"

namespace nnkgc::vgae {

namespace {

ad::Tensor xavier(std::size_t in, std::size_t out, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> v(in * out);
  for (double& x : v) x = dist(rng);
  return ad::Tensor(in, out, std::move(v), true);
}

}  // namespace

std::optional<MaskedAdjacency> mask_edges(const kg::DenseAdjacency& a, double ratio,
                                          std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw ConfigError("mask ratio must lie in (0, 1)");
  auto edges = a.edges();
  if (edges.empty()) return std::nullopt;

  Rng rng(derive_seed(seed, "mask_edges"));
  const auto count = static_cast<std::size_t>(
      std::ceil(ratio * static_cast<double>(edges.size()) - 1e-9));
  std::shuffle(edges.begin(), edges.end(), rng);
  edges.resize(std::max<std::size_t>(count, 1));
  std::sort(edges.begin(), edges.end());

  MaskedAdjacency out{a, EdgeMask{}};
  out.mask.ratio = ratio;
  out.mask.seed = seed;
  for (auto [i, j] : edges) {
    out.visible.set(i, j, false);
    out.visible.set(j, i, false);
  }
  out.mask.positives = std::move(edges);

  const std::size_t n = a.size();
  std::vector<NodePair> candidates;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j && !a(i, j) && !a(j, i)) candidates.emplace_back(i, j);
  const std::size_t want = std::min(out.mask.positives.size(), candidates.size());
  for (std::size_t k = 0; k < want; ++k) {
    std::uniform_int_distribution<std::size_t> pick(k, candidates.size() - 1);
    std::swap(candidates[k], candidates[pick(rng)]);
  }
  candidates.resize(want);
  std::sort(candidates.begin(), candidates.end());
  out.mask.negatives = std::move(candidates);
  return out;
}

VgaeAux::VgaeAux(std::size_t dim, std::size_t latent_dim, Rng& rng)
    : dim_(dim), latent_(latent_dim == 0 ? std::max<std::size_t>(dim / 2, 1) : latent_dim) {
  if (dim == 0) throw ConfigError("VGAE dim must be positive");
  w_shared_ = xavier(dim_, dim_, rng);
  w_mu_ = xavier(dim_, latent_, rng);
  w_sigma_ = xavier(dim_, latent_, rng);
}

VgaeState VgaeAux::encode(const ad::Tensor& x, const kg::DenseAdjacency& visible) const {
  if (x.rows() != visible.size() || x.cols() != dim_)
    throw DimensionError("vgae_encode: features " + x.shape_string() + " for " +
                         std::to_string(visible.size()) + " nodes of dim " + std::to_string(dim_));
  const ad::Tensor a_hat = graph::normalize_adjacency(visible);
  const ad::Tensor h = graph::gcn_layer(x, a_hat, w_shared_, graph::Activation::relu);
  VgaeState state;
  state.mu = graph::gcn_layer(h, a_hat, w_mu_, graph::Activation::none);
  state.log_sigma = ad::clamp(graph::gcn_layer(h, a_hat, w_sigma_, graph::Activation::none),
                              -kLogSigmaBound, kLogSigmaBound);
  return state;
}

std::vector<ad::Parameter> VgaeAux::parameters() const {
  return {{"vgae.shared", w_shared_, true}, {"vgae.mu", w_mu_, true},
          {"vgae.log_sigma", w_sigma_, true}};
}

ad::Tensor sample_noise(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Rng rng(derive_seed(seed, "vgae_noise"));
  std::normal_distribution<double> dist(0.0, 1.0);
  std::vector<double> v(rows * cols);
  for (double& x : v) x = dist(rng);
  return ad::Tensor(rows, cols, std::move(v));
}

ad::Tensor reparameterize(const VgaeState& state, const ad::Tensor& eps) {
  if (eps.shape() != state.mu.shape() || state.log_sigma.shape() != state.mu.shape())
    throw DimensionError("reparameterize: mu " + state.mu.shape_string() + ", log_sigma " +
                         state.log_sigma.shape_string() + ", noise " + eps.shape_string());
  return ad::add(state.mu, ad::hadamard(ad::exp(state.log_sigma), eps.detach()));
}

ad::Tensor reparameterize(const VgaeState& state, std::uint64_t seed) {
  return reparameterize(state, sample_noise(state.mu.rows(), state.mu.cols(), seed));
}

double decode_edge(const ad::Tensor& z, std::size_t i, std::size_t j) {
  if (i >= z.rows() || j >= z.rows())
    throw IndexError("decode_edge: pair (" + std::to_string(i) + ", " + std::to_string(j) +
                     ") outside " + std::to_string(z.rows()) + " nodes");
  double dot = 0.0;
  for (std::size_t k = 0; k < z.cols(); ++k) dot += z(i, k) * z(j, k);
  return dot >= 0 ? 1.0 / (1.0 + std::exp(-dot)) : std::exp(dot) / (1.0 + std::exp(dot));
}

ad::Tensor pair_logits(const ad::Tensor& z, const std::vector<NodePair>& pairs) {
  std::vector<std::size_t> left, right;
  for (auto [i, j] : pairs) {
    if (i >= z.rows() || j >= z.rows())
      throw IndexError("pair_logits: pair (" + std::to_string(i) + ", " + std::to_string(j) +
                       ") outside " + std::to_string(z.rows()) + " nodes");
    left.push_back(i);
    right.push_back(j);
  }
  return ad::sum_cols(ad::hadamard(ad::gather_rows(z, left), ad::gather_rows(z, right)));
}

EdgeLoss edge_loss(const VgaeState& state, const ad::Tensor& z, const EdgeMask& mask,
                   double beta) {
  EdgeLoss out;
  if (mask.empty()) {
    out.skipped = true;
    out.total = ad::Tensor::scalar(0.0);
    return out;
  }
  std::vector<NodePair> pairs = mask.positives;
  pairs.insert(pairs.end(), mask.negatives.begin(), mask.negatives.end());
  std::vector<double> sign(pairs.size(), 1.0);
  for (std::size_t k = 0; k < mask.positives.size(); ++k) sign[k] = -1.0;
  // BCE(y, σ(x)) = softplus((1 − 2y) x)
  const ad::Tensor signs(pairs.size(), 1, std::move(sign));
  const ad::Tensor bce = ad::mean(ad::softplus(ad::hadamard(pair_logits(z, pairs), signs)));

  const std::size_t n = state.mu.rows();
  if (beta <= 0.0) beta = 1.0 / static_cast<double>(n);
  // 0.5 · Σ_k (mu² + σ² − 1 − 2 log σ) per node, averaged over nodes.
  const ad::Tensor ls = state.log_sigma;
  const ad::Tensor terms = ad::sub(ad::add(ad::hadamard(state.mu, state.mu), ad::exp(ad::scale(ls, 2.0))),
                                   ad::add(ad::Tensor::full(ls.rows(), ls.cols(), 1.0), ad::scale(ls, 2.0)));
  const ad::Tensor kl = ad::scale(ad::sum(terms), 0.5 / static_cast<double>(n));
  out.total = ad::add(bce, ad::scale(kl, beta));
  out.bce = bce.item();
  out.kl = kl.item();
  return out;
}

double reconstruction_accuracy(const ad::Tensor& z, const EdgeMask& mask) {
  std::size_t correct = 0;
  for (auto [i, j] : mask.positives) correct += decode_edge(z, i, j) > 0.5;
  for (auto [i, j] : mask.negatives) correct += decode_edge(z, i, j) < 0.5;
  const std::size_t total = mask.positives.size() + mask.negatives.size();
  return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
}

}  // namespace nnkgc::vgae
