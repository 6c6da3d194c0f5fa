#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "nnkgc/autodiff/adamw.hpp"
#include "nnkgc/autodiff/ops.hpp"
#include "nnkgc/autodiff/tensor.hpp"
#include "nnkgc/kg/neighborhood.hpp"
#include "nnkgc/seed.hpp"

namespace nnkgc::graph {

enum class Variant { gcn, gat, sage };

std::string_view variant_name(Variant v);
Variant parse_variant(std::string_view name);

enum class Activation { relu, leaky_relu, tanh, none };

std::string_view activation_name(Activation a);
Activation parse_activation(std::string_view name);
ad::Tensor activate(const ad::Tensor& x, Activation a);

struct GraphEncoderConfig {
  Variant variant = Variant::gat;
  std::size_t layers = 2;
  std::size_t dim = 48;
  std::size_t gat_heads = 3;
  Activation activation = Activation::relu;
  // Per-layer output widths for hidden layers; empty means dim everywhere.
  std::vector<std::size_t> hidden_dims;
  double dropout = 0.0;

  void validate() const;
  std::size_t layer_output(std::size_t layer) const;
};

// D̃^-1/2 (A_sym + I) D̃^-1/2 as a constant tensor.
ad::Tensor normalize_adjacency(const kg::DenseAdjacency& a);

// Attention mask A_sym + I.
ad::Mask attention_mask(const kg::DenseAdjacency& a);

// Row-mean aggregation matrix over A_sym; isolated nodes get a zero row.
ad::Tensor mean_aggregator(const kg::DenseAdjacency& a);

// Â X W, then activation.
ad::Tensor gcn_layer(const ad::Tensor& x, const ad::Tensor& a_hat, const ad::Tensor& w,
                     Activation act);

struct GatHead {
  ad::Tensor w;      // d_in × d_out
  ad::Tensor a_src;  // d_out × 1
  ad::Tensor a_dst;  // d_out × 1
};

struct GatOutput {
  ad::Tensor h;
  std::vector<ad::Tensor> attention;  // one n×n matrix per head
};

// Per head: α = softmax_rows(mask(leaky_relu(s_i + t_j))), out = α X W.
// Heads are concatenated (average = false) or averaged (average = true).
GatOutput gat_layer(const ad::Tensor& x, const ad::Mask& mask, std::span<const GatHead> heads,
                    bool average, Activation act);

// activation([X ⧺ M X] W) with M from mean_aggregator.
ad::Tensor sage_layer(const ad::Tensor& x, const ad::Tensor& aggregator, const ad::Tensor& w,
                      Activation act);

struct EncodeResult {
  ad::Tensor e_hr;  // 1×d
  // GAT only: attention of the head node over the subgraph nodes on the last
  // layer, averaged over heads. Empty otherwise.
  std::vector<double> head_attention;
};

class GraphEncoder {
 public:
  GraphEncoder(const GraphEncoderConfig& config, Rng& rng);

  const GraphEncoderConfig& config() const noexcept { return config_; }

  // X row 0 is the head encoding, rows 1.. follow subgraph node order.
  // dropout_rng is only used when config.dropout > 0.
  EncodeResult encode(const kg::DenseAdjacency& adjacency, const ad::Tensor& x,
                      Rng* dropout_rng = nullptr) const;
  EncodeResult encode(const kg::NeighborhoodSubgraph& subgraph, const ad::Tensor& x,
                      Rng* dropout_rng = nullptr) const;

  // Full last-layer node matrix (without the residual).
  ad::Tensor forward(const kg::DenseAdjacency& adjacency, const ad::Tensor& x,
                     Rng* dropout_rng = nullptr, std::vector<double>* head_attention = nullptr) const;

  std::vector<ad::Parameter> parameters() const;

 private:
  struct Layer {
    ad::Tensor w;               // gcn / sage
    std::vector<GatHead> heads;  // gat
  };

  GraphEncoderConfig config_;
  std::vector<Layer> layers_;
};

}  // namespace nnkgc::graph
