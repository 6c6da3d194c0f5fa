#include "nnkgc/graph/graph_encoder.hpp"

#include <cmath>
#include <string>

#include "nnkgc/errors.hpp"

namespace nnkgc::graph {

namespace {

ad::Tensor xavier(std::size_t in, std::size_t out, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> v(in * out);
  for (double& x : v) x = dist(rng);
  return ad::Tensor(in, out, std::move(v), true);
}

}  // namespace

std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::gcn: return "gcn";
    case Variant::gat: return "gat";
    case Variant::sage: return "sage";
  }
  return "?";
}

Variant parse_variant(std::string_view name) {
  if (name == "gcn" || name == "GCN") return Variant::gcn;
  if (name == "gat" || name == "GAT") return Variant::gat;
  if (name == "sage" || name == "graphsage" || name == "GraphSAGE") return Variant::sage;
  throw ConfigError("unknown graph encoder '" + std::string(name) + "' (expected gcn, gat or sage)");
}

std::string_view activation_name(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::leaky_relu: return "leaky_relu";
    case Activation::tanh: return "tanh";
    case Activation::none: return "none";
  }
  return "?";
}

Activation parse_activation(std::string_view name) {
  if (name == "relu") return Activation::relu;
  if (name == "leaky_relu") return Activation::leaky_relu;
  if (name == "tanh") return Activation::tanh;
  if (name == "none") return Activation::none;
  throw ConfigError("unknown activation '" + std::string(name) + "'");
}

ad::Tensor activate(const ad::Tensor& x, Activation a) {
  switch (a) {
    case Activation::relu: return ad::relu(x);
    case Activation::leaky_relu: return ad::leaky_relu(x);
    case Activation::tanh: return ad::tanh(x);
    case Activation::none: return x;
  }
  return x;
}

void GraphEncoderConfig::validate() const {
  if (layers == 0) throw ConfigError("graph encoder needs at least one layer");
  if (dim == 0) throw ConfigError("graph dim must be positive");
  if (!hidden_dims.empty() && hidden_dims.size() != layers - 1)
    throw ConfigError("hidden_dims must list " + std::to_string(layers - 1) + " widths");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must be in [0, 1)");
  if (variant == Variant::gat) {
    if (gat_heads == 0) throw ConfigError("gat_heads must be positive");
    for (std::size_t l = 0; l + 1 < layers; ++l) {
      if (layer_output(l) % gat_heads != 0)
        throw ConfigError("GAT hidden width " + std::to_string(layer_output(l)) +
                          " is not divisible by " + std::to_string(gat_heads) + " heads");
    }
  }
  for (std::size_t w : hidden_dims)
    if (w == 0) throw ConfigError("hidden widths must be positive");
}

std::size_t GraphEncoderConfig::layer_output(std::size_t layer) const {
  if (layer + 1 >= layers || hidden_dims.empty()) return dim;
  return hidden_dims[layer];
}

ad::Tensor normalize_adjacency(const kg::DenseAdjacency& a) {
  const std::size_t n = a.size();
  std::vector<double> m(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    m[i * n + i] = 1.0;
    for (std::size_t j = 0; j < n; ++j)
      if (i != j && (a(i, j) || a(j, i))) m[i * n + j] = 1.0;
  }
  std::vector<double> inv_sqrt(n);
  for (std::size_t i = 0; i < n; ++i) {
    double deg = 0.0;
    for (std::size_t j = 0; j < n; ++j) deg += m[i * n + j];
    inv_sqrt[i] = 1.0 / std::sqrt(deg);
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) m[i * n + j] *= inv_sqrt[i] * inv_sqrt[j];
  return ad::Tensor(n, n, std::move(m));
}

ad::Mask attention_mask(const kg::DenseAdjacency& a) {
  const std::size_t n = a.size();
  ad::Mask mask{n, n, std::vector<std::uint8_t>(n * n, 0)};
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) mask.set(i, j, i == j || a(i, j) || a(j, i));
  return mask;
}

ad::Tensor mean_aggregator(const kg::DenseAdjacency& a) {
  const std::size_t n = a.size();
  std::vector<double> m(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t deg = 0;
    for (std::size_t j = 0; j < n; ++j)
      if (i != j && (a(i, j) || a(j, i))) ++deg;
    if (deg == 0) continue;
    for (std::size_t j = 0; j < n; ++j)
      if (i != j && (a(i, j) || a(j, i))) m[i * n + j] = 1.0 / static_cast<double>(deg);
  }
  return ad::Tensor(n, n, std::move(m));
}

ad::Tensor gcn_layer(const ad::Tensor& x, const ad::Tensor& a_hat, const ad::Tensor& w,
                     Activation act) {
  if (a_hat.rows() != x.rows())
    throw DimensionError("gcn_layer: adjacency " + a_hat.shape_string() + " vs features " +
                         x.shape_string());
  return activate(ad::matmul(a_hat, ad::matmul(x, w)), act);
}

GatOutput gat_layer(const ad::Tensor& x, const ad::Mask& mask, std::span<const GatHead> heads,
                    bool average, Activation act) {
  if (mask.rows != x.rows())
    throw DimensionError("gat_layer: mask of " + std::to_string(mask.rows) + " rows vs features " +
                         x.shape_string());
  if (heads.empty()) throw ContractError("gat_layer: no attention heads");
  GatOutput out;
  std::vector<ad::Tensor> outputs;
  for (const GatHead& head : heads) {
    ad::Tensor wx = ad::matmul(x, head.w);
    ad::Tensor scores = ad::leaky_relu(ad::outer_sum(ad::matmul(wx, head.a_src), ad::matmul(wx, head.a_dst)));
    ad::Tensor alpha = ad::softmax_rows(scores, &mask);
    outputs.push_back(ad::matmul(alpha, wx));
    out.attention.push_back(alpha);
  }
  ad::Tensor h;
  if (average) {
    h = outputs[0];
    for (std::size_t i = 1; i < outputs.size(); ++i) h = ad::add(h, outputs[i]);
    h = ad::scale(h, 1.0 / static_cast<double>(outputs.size()));
  } else {
    h = ad::concat_cols(outputs);
  }
  out.h = activate(h, act);
  return out;
}

ad::Tensor sage_layer(const ad::Tensor& x, const ad::Tensor& aggregator, const ad::Tensor& w,
                      Activation act) {
  if (aggregator.rows() != x.rows())
    throw DimensionError("sage_layer: aggregator " + aggregator.shape_string() + " vs features " +
                         x.shape_string());
  const ad::Tensor parts[] = {x, ad::matmul(aggregator, x)};
  return activate(ad::matmul(ad::concat_cols(parts), w), act);
}

GraphEncoder::GraphEncoder(const GraphEncoderConfig& config, Rng& rng) : config_(config) {
  config_.validate();
  std::size_t in = config_.dim;
  for (std::size_t l = 0; l < config_.layers; ++l) {
    const std::size_t out = config_.layer_output(l);
    const bool last = l + 1 == config_.layers;
    Layer layer;
    switch (config_.variant) {
      case Variant::gcn:
        layer.w = xavier(in, out, rng);
        break;
      case Variant::sage:
        layer.w = xavier(2 * in, out, rng);
        break;
      case Variant::gat: {
        const std::size_t per_head = last ? out : out / config_.gat_heads;
        for (std::size_t h = 0; h < config_.gat_heads; ++h)
          layer.heads.push_back({xavier(in, per_head, rng), xavier(per_head, 1, rng),
                                 xavier(per_head, 1, rng)});
        break;
      }
    }
    layers_.push_back(std::move(layer));
    in = out;
  }
}

ad::Tensor GraphEncoder::forward(const kg::DenseAdjacency& adjacency, const ad::Tensor& x,
                                 Rng* dropout_rng, std::vector<double>* head_attention) const {
  if (x.rows() != adjacency.size())
    throw DimensionError("encode_neighborhood: " + std::to_string(x.rows()) +
                         " feature rows for a subgraph of " + std::to_string(adjacency.size()) +
                         " nodes");
  if (x.cols() != config_.dim)
    throw DimensionError("encode_neighborhood: features " + x.shape_string() + " but dim " +
                         std::to_string(config_.dim));
  ad::Tensor a_hat, aggregator;
  ad::Mask mask;
  switch (config_.variant) {
    case Variant::gcn: a_hat = normalize_adjacency(adjacency); break;
    case Variant::sage: aggregator = mean_aggregator(adjacency); break;
    case Variant::gat: mask = attention_mask(adjacency); break;
  }
  ad::Tensor h = x;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const bool last = l + 1 == layers_.size();
    const Activation act = last ? Activation::none : config_.activation;
    if (config_.dropout > 0.0 && dropout_rng) h = ad::dropout(h, config_.dropout, *dropout_rng);
    switch (config_.variant) {
      case Variant::gcn: h = gcn_layer(h, a_hat, layers_[l].w, act); break;
      case Variant::sage: h = sage_layer(h, aggregator, layers_[l].w, act); break;
      case Variant::gat: {
        GatOutput g = gat_layer(h, mask, layers_[l].heads, last, act);
        h = g.h;
        if (last && head_attention) {
          const std::size_t n = adjacency.size();
          head_attention->assign(n, 0.0);
          for (const auto& alpha : g.attention)
            for (std::size_t j = 0; j < n; ++j)
              (*head_attention)[j] += alpha(0, j) / static_cast<double>(g.attention.size());
        }
        break;
      }
    }
  }
  return h;
}

EncodeResult GraphEncoder::encode(const kg::DenseAdjacency& adjacency, const ad::Tensor& x,
                                  Rng* dropout_rng) const {
  EncodeResult result;
  ad::Tensor h = forward(adjacency, x, dropout_rng,
                         config_.variant == Variant::gat ? &result.head_attention : nullptr);
  const std::size_t zero[] = {0};
  result.e_hr = ad::add(ad::gather_rows(h, zero), ad::gather_rows(x, zero));
  return result;
}

EncodeResult GraphEncoder::encode(const kg::NeighborhoodSubgraph& subgraph, const ad::Tensor& x,
                                  Rng* dropout_rng) const {
  return encode(subgraph.adjacency, x, dropout_rng);
}

std::vector<ad::Parameter> GraphEncoder::parameters() const {
  std::vector<ad::Parameter> out;
  const std::string prefix = std::string("graph.") + std::string(variant_name(config_.variant));
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const std::string p = prefix + ".layer" + std::to_string(l);
    if (layers_[l].w.defined()) out.push_back({p + ".w", layers_[l].w, true});
    for (std::size_t h = 0; h < layers_[l].heads.size(); ++h) {
      const std::string ph = p + ".head" + std::to_string(h);
      out.push_back({ph + ".w", layers_[l].heads[h].w, true});
      out.push_back({ph + ".a_src", layers_[l].heads[h].a_src, true});
      out.push_back({ph + ".a_dst", layers_[l].heads[h].a_dst, true});
    }
  }
  return out;
}

}  // namespace nnkgc::graph
