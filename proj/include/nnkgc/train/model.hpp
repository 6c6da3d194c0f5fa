#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nnkgc/autodiff/adamw.hpp"
#include "nnkgc/autodiff/tensor.hpp"
#include "nnkgc/graph/graph_encoder.hpp"
#include "nnkgc/kg/knowledge_graph.hpp"
#include "nnkgc/kg/neighborhood.hpp"
#include "nnkgc/text/text_encoder.hpp"
#include "nnkgc/text/tokenizer.hpp"
#include "nnkgc/train/config.hpp"
#include "nnkgc/vgae/vgae.hpp"

namespace nnkgc::train {

struct Query {
  kg::EntityId head = 0;
  kg::RelationId relation = 0;
  kg::EntityId tail = 0;
  // Drop the head–tail train edge from the neighborhood (training queries).
  bool exclude_answer_edge = false;
};

struct QueryEncoding {
  ad::Tensor e_hr;                                // b×d
  std::vector<ad::Tensor> features;               // per query: X (n_i×d)
  std::vector<kg::NeighborhoodSubgraph> subgraphs;
  std::vector<std::vector<double>> head_attention;  // GAT only
};

class Model {
 public:
  // Initializes every component from streams derived from seed.
  Model(const RunConfig& config, text::Tokenizer tokenizer, const kg::KnowledgeGraph& kg);

  const RunConfig& config() const noexcept { return config_; }
  const text::Tokenizer& tokenizer() const noexcept { return text_.tokenizer(); }
  const text::EntityTextIndex& text_index() const noexcept { return index_; }
  const text::TextEncoder& text_encoder() const noexcept { return text_; }
  const graph::GraphEncoder& graph_encoder() const noexcept { return graph_; }
  const std::optional<vgae::VgaeAux>& vgae() const noexcept { return vgae_; }
  const ad::Tensor& log_inv_tau() const noexcept { return log_inv_tau_; }
  double temperature() const;

  // Every tensor stored in a checkpoint.
  std::vector<ad::Parameter> parameters() const;
  // The subset the optimizer updates.
  std::vector<ad::Parameter> trainable_parameters() const;

  kg::NeighborhoodSubgraph neighborhood(const kg::KnowledgeGraph& kg, const Query& q,
                                        std::uint64_t seed) const;
  // e_hr for each query; neighborhoods are sampled with neighborhood_seed.
  QueryEncoding encode_queries(const kg::KnowledgeGraph& kg, std::span<const Query> queries,
                               std::uint64_t neighborhood_seed, Rng* dropout_rng = nullptr) const;
  ad::Tensor encode_entities(std::span<const kg::EntityId> ids) const;
  // All entity tail embeddings, computed without gradient tracking.
  ad::Tensor all_tail_embeddings() const;

  // Copies values from a checkpoint map; throws ContractError on a missing
  // tensor or shape mismatch.
  void load_state(const std::map<std::string, ad::Tensor>& tensors);

 private:
  RunConfig config_;
  text::TextEncoder text_;
  text::EntityTextIndex index_;
  graph::GraphEncoder graph_;
  std::optional<vgae::VgaeAux> vgae_;
  ad::Tensor log_inv_tau_;
};

}  // namespace nnkgc::train
