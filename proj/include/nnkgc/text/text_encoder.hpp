#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "nnkgc/autodiff/adamw.hpp"
#include "nnkgc/autodiff/tensor.hpp"
#include "nnkgc/kg/knowledge_graph.hpp"
#include "nnkgc/seed.hpp"
#include "nnkgc/text/tokenizer.hpp"

namespace nnkgc::text {

enum class TextMode { mean_pool, transformer_lite };

std::string_view text_mode_name(TextMode mode);
TextMode parse_text_mode(std::string_view name);

struct TextEncoderConfig {
  std::size_t dim = 48;
  TextMode mode = TextMode::mean_pool;
  // transformer_lite only
  std::size_t layers = 1;
  std::size_t heads = 2;
  std::size_t ff_width = 96;
  std::size_t max_length = 64;

  void validate() const;
};

struct TokenSequence {
  std::vector<TokenId> ids;
  // Set when both name and description are empty.
  bool flagged = false;
};

// [name ⧺ desc ⧺ SEP ⧺ relation]. Over-long sequences lose tokens from the end
// of the description only; name and relation are always kept whole.
TokenSequence head_sequence(std::span<const TokenId> name, std::span<const TokenId> desc,
                            std::span<const TokenId> relation, std::size_t max_length);
// [name ⧺ desc], or [SEP] when both are empty.
TokenSequence tail_sequence(std::span<const TokenId> name, std::span<const TokenId> desc,
                            std::size_t max_length);

// Pre-tokenized names, descriptions and relation phrases of a graph.
class EntityTextIndex {
 public:
  EntityTextIndex() = default;
  EntityTextIndex(const kg::KnowledgeGraph& kg, const Tokenizer& tokenizer);

  std::size_t entity_count() const noexcept { return names_.size(); }
  std::span<const TokenId> name(kg::EntityId e) const { return names_.at(e); }
  std::span<const TokenId> description(kg::EntityId e) const { return descriptions_.at(e); }
  std::span<const TokenId> relation(kg::RelationId r) const { return relations_.at(r); }

  TokenSequence head(kg::EntityId e, kg::RelationId r, std::size_t max_length) const {
    return head_sequence(name(e), description(e), relation(r), max_length);
  }
  TokenSequence tail(kg::EntityId e, std::size_t max_length) const {
    return tail_sequence(name(e), description(e), max_length);
  }

 private:
  std::vector<std::vector<TokenId>> names_;
  std::vector<std::vector<TokenId>> descriptions_;
  std::vector<std::vector<TokenId>> relations_;
};

// One encoder stack (pooling or small transformer) followed by a linear
// projection. The head and tail towers share the token embedding table.
class TextTower {
 public:
  TextTower(std::string prefix, const TextEncoderConfig& config, Rng& rng);

  // Contextual encodings averaged over the sequence, before the projection. n×d.
  ad::Tensor pool(const ad::Tensor& embeddings, std::span<const TokenSequence> seqs) const;
  // pool() followed by the projection. n×d.
  ad::Tensor encode(const ad::Tensor& embeddings, std::span<const TokenSequence> seqs) const;
  void collect(std::vector<ad::Parameter>& out) const;

 private:
  struct Layer {
    ad::Tensor wq, wk, wv, wo, w1, b1, w2, b2;
  };
  ad::Tensor contextualize(const ad::Tensor& embeddings, const TokenSequence& seq) const;

  std::string prefix_;
  TextEncoderConfig config_;
  ad::Tensor positions_;
  std::vector<Layer> layers_;
  ad::Tensor projection_;
  ad::Tensor bias_;
};

class TextEncoder {
 public:
  TextEncoder(const TextEncoderConfig& config, Tokenizer tokenizer, Rng& rng);

  const TextEncoderConfig& config() const noexcept { return config_; }
  const Tokenizer& tokenizer() const noexcept { return tokenizer_; }
  std::size_t dim() const noexcept { return config_.dim; }

  // String entry points. Each returns a 1×d row.
  ad::Tensor encode_head(std::string_view name, std::string_view desc,
                         std::string_view relation_phrase) const;
  ad::Tensor encode_tail(std::string_view name, std::string_view desc) const;
  ad::Tensor encode_neighbor(std::string_view name, std::string_view desc) const {
    return encode_tail(name, desc);
  }

  // Batched entry points over pre-tokenized sequences. n×d.
  ad::Tensor encode_heads(std::span<const TokenSequence> seqs) const;
  ad::Tensor encode_tails(std::span<const TokenSequence> seqs) const;
  ad::Tensor encode_neighbors(std::span<const TokenSequence> seqs) const { return encode_tails(seqs); }

  // Pooled head-tower encoding before the projection (1×d).
  ad::Tensor pooled_head(std::string_view name, std::string_view desc,
                         std::string_view relation_phrase) const;

  TokenSequence head_tokens(std::string_view name, std::string_view desc,
                            std::string_view relation_phrase) const;
  TokenSequence tail_tokens(std::string_view name, std::string_view desc) const;

  const ad::Tensor& token_embeddings() const noexcept { return embeddings_; }
  std::vector<ad::Parameter> parameters() const;

 private:
  TextEncoderConfig config_;
  Tokenizer tokenizer_;
  ad::Tensor embeddings_;
  TextTower head_tower_;
  TextTower tail_tower_;
};

}  // namespace nnkgc::text
