#include "nnkgc/train/model.hpp"

#include <algorithm>
#include <cmath>

#include "nnkgc/autodiff/ops.hpp"
#include "nnkgc/errors.hpp"
#include "nnkgc/train/losses.hpp"

namespace nnkgc::train {

namespace {

std::uint64_t root_seed(const RunConfig& c) { return c.seed.value_or(0); }

text::TextEncoder make_text(const RunConfig& c, text::Tokenizer tokenizer) {
  Rng rng = make_rng(root_seed(c), "init.text");
  return text::TextEncoder(c.text_config(), std::move(tokenizer), rng);
}

graph::GraphEncoder make_graph(const RunConfig& c) {
  Rng rng = make_rng(root_seed(c), "init.graph");
  return graph::GraphEncoder(c.graph_config(), rng);
}

std::optional<vgae::VgaeAux> make_vgae(const RunConfig& c) {
  if (!c.vgae) return std::nullopt;
  Rng rng = make_rng(root_seed(c), "init.vgae");
  return vgae::VgaeAux(c.dim, c.latent_dim, rng);
}

}  // namespace

Model::Model(const RunConfig& config, text::Tokenizer tokenizer, const kg::KnowledgeGraph& kg)
    : config_(config),
      text_(make_text(config, std::move(tokenizer))),
      index_(kg, text_.tokenizer()),
      graph_(make_graph(config)),
      vgae_(make_vgae(config)),
      log_inv_tau_(ad::Tensor::scalar(std::log(1.0 / config.tau), config.learn_tau)) {}

double Model::temperature() const {
  ad::NoGradGuard guard;
  return 1.0 / inverse_temperature(log_inv_tau_).item();
}

std::vector<ad::Parameter> Model::parameters() const {
  std::vector<ad::Parameter> out = text_.parameters();
  for (auto& p : graph_.parameters()) out.push_back(std::move(p));
  if (vgae_)
    for (auto& p : vgae_->parameters()) out.push_back(std::move(p));
  out.push_back({"temperature.log_inv", log_inv_tau_, false});
  return out;
}

std::vector<ad::Parameter> Model::trainable_parameters() const {
  std::vector<ad::Parameter> out = parameters();
  std::erase_if(out, [](const ad::Parameter& p) { return !p.tensor.requires_grad(); });
  return out;
}

kg::NeighborhoodSubgraph Model::neighborhood(const kg::KnowledgeGraph& kg, const Query& q,
                                             std::uint64_t seed) const {
  kg::NeighborhoodOptions opts;
  opts.hops = config_.hops;
  opts.cap_per_hop = config_.cap_per_hop;
  opts.seed = seed;
  if (q.exclude_answer_edge) opts.exclude_link_to = q.tail;
  return kg::khop_neighborhood(kg, q.head, opts);
}

QueryEncoding Model::encode_queries(const kg::KnowledgeGraph& kg, std::span<const Query> queries,
                                    std::uint64_t neighborhood_seed, Rng* dropout_rng) const {
  QueryEncoding out;
  if (queries.empty()) throw ContractError("encode_queries: empty batch");
  const std::size_t max_len = config_.max_length;
  std::vector<text::TokenSequence> heads, neighbors;
  std::vector<std::size_t> offsets{0};
  for (const Query& q : queries) {
    if (q.head >= kg.entity_count() || q.relation >= kg.relation_count())
      throw LookupError("query (" + std::to_string(q.head) + ", " + std::to_string(q.relation) +
                        ") outside the graph");
    out.subgraphs.push_back(neighborhood(kg, q, neighborhood_seed));
    heads.push_back(index_.head(q.head, q.relation, max_len));
    const auto& nodes = out.subgraphs.back().nodes;
    for (std::size_t i = 1; i < nodes.size(); ++i) neighbors.push_back(index_.tail(nodes[i], max_len));
    offsets.push_back(neighbors.size());
  }
  const ad::Tensor head_enc = text_.encode_heads(heads);
  ad::Tensor nb_enc;
  if (!neighbors.empty()) nb_enc = text_.encode_neighbors(neighbors);

  std::vector<ad::Tensor> rows;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    const std::size_t self[] = {i};
    ad::Tensor x = ad::gather_rows(head_enc, self);
    if (offsets[i + 1] > offsets[i]) {
      std::vector<std::size_t> idx(offsets[i + 1] - offsets[i]);
      for (std::size_t k = 0; k < idx.size(); ++k) idx[k] = offsets[i] + k;
      const ad::Tensor parts[] = {x, ad::gather_rows(nb_enc, idx)};
      x = ad::concat_rows(parts);
    }
    graph::EncodeResult r = graph_.encode(out.subgraphs[i], x, dropout_rng);
    rows.push_back(r.e_hr);
    out.features.push_back(std::move(x));
    out.head_attention.push_back(std::move(r.head_attention));
  }
  out.e_hr = ad::concat_rows(rows);
  return out;
}

ad::Tensor Model::encode_entities(std::span<const kg::EntityId> ids) const {
  std::vector<text::TokenSequence> seqs;
  seqs.reserve(ids.size());
  for (kg::EntityId e : ids) seqs.push_back(index_.tail(e, config_.max_length));
  return text_.encode_tails(seqs);
}

ad::Tensor Model::all_tail_embeddings() const {
  ad::NoGradGuard guard;
  constexpr std::size_t kChunk = 1024;
  const std::size_t n = index_.entity_count();
  std::vector<ad::Tensor> parts;
  for (std::size_t begin = 0; begin < n; begin += kChunk) {
    std::vector<kg::EntityId> ids;
    for (std::size_t e = begin; e < std::min(n, begin + kChunk); ++e)
      ids.push_back(static_cast<kg::EntityId>(e));
    parts.push_back(encode_entities(ids));
  }
  return parts.size() == 1 ? parts[0] : ad::concat_rows(parts);
}

void Model::load_state(const std::map<std::string, ad::Tensor>& tensors) {
  for (auto& p : parameters()) {
    auto it = tensors.find(p.name);
    if (it == tensors.end()) throw ContractError("checkpoint lacks tensor " + p.name);
    if (it->second.shape() != p.tensor.shape())
      throw ContractError("checkpoint tensor " + p.name + " has shape " + it->second.shape_string() +
                          ", model expects " + p.tensor.shape_string());
    auto src = it->second.values();
    std::copy(src.begin(), src.end(), p.tensor.mutable_values().begin());
  }
}

}  // namespace nnkgc::train
