#include "nnkgc/text/text_encoder.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "nnkgc/autodiff/ops.hpp"
#include "nnkgc/errors.hpp"

namespace nnkgc::text {

namespace {

ad::Tensor random_matrix(std::size_t rows, std::size_t cols, double stddev, Rng& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  std::vector<double> v(rows * cols);
  for (double& x : v) x = dist(rng);
  return ad::Tensor(rows, cols, std::move(v), true);
}

ad::Tensor xavier(std::size_t in, std::size_t out, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> v(in * out);
  for (double& x : v) x = dist(rng);
  return ad::Tensor(in, out, std::move(v), true);
}

void append(std::vector<TokenId>& out, std::span<const TokenId> part) {
  out.insert(out.end(), part.begin(), part.end());
}

}  // namespace

std::string_view text_mode_name(TextMode mode) {
  return mode == TextMode::mean_pool ? "mean_pool" : "transformer_lite";
}

TextMode parse_text_mode(std::string_view name) {
  if (name == "mean_pool") return TextMode::mean_pool;
  if (name == "transformer_lite") return TextMode::transformer_lite;
  throw ConfigError("unknown text mode '" + std::string(name) +
                    "' (expected mean_pool or transformer_lite)");
}

void TextEncoderConfig::validate() const {
  if (dim == 0) throw ConfigError("text dim must be positive");
  if (max_length < 2) throw ConfigError("max_length must be at least 2");
  if (mode == TextMode::transformer_lite) {
    if (layers == 0) throw ConfigError("transformer_lite needs at least one layer");
    if (heads == 0 || dim % heads != 0)
      throw ConfigError("text dim " + std::to_string(dim) + " is not divisible by " +
                        std::to_string(heads) + " attention heads");
    if (ff_width == 0) throw ConfigError("ff_width must be positive");
  }
}

TokenSequence head_sequence(std::span<const TokenId> name, std::span<const TokenId> desc,
                            std::span<const TokenId> relation, std::size_t max_length) {
  TokenSequence seq;
  seq.flagged = name.empty() && desc.empty();
  const std::size_t fixed = name.size() + 1 + relation.size();
  const std::size_t room = max_length > fixed ? max_length - fixed : 0;
  append(seq.ids, name);
  append(seq.ids, desc.first(std::min(desc.size(), room)));
  seq.ids.push_back(kSep);
  append(seq.ids, relation);
  return seq;
}

TokenSequence tail_sequence(std::span<const TokenId> name, std::span<const TokenId> desc,
                            std::size_t max_length) {
  TokenSequence seq;
  if (name.empty() && desc.empty()) {
    seq.flagged = true;
    seq.ids.push_back(kSep);
    return seq;
  }
  const std::size_t room = max_length > name.size() ? max_length - name.size() : 0;
  append(seq.ids, name);
  append(seq.ids, desc.first(std::min(desc.size(), room)));
  return seq;
}

EntityTextIndex::EntityTextIndex(const kg::KnowledgeGraph& kg, const Tokenizer& tokenizer) {
  names_.reserve(kg.entity_count());
  descriptions_.reserve(kg.entity_count());
  for (const auto& e : kg.entities()) {
    names_.push_back(tokenizer.encode(e.name));
    descriptions_.push_back(tokenizer.encode(e.description));
  }
  relations_.reserve(kg.relation_count());
  for (kg::RelationId r = 0; r < kg.relation_count(); ++r)
    relations_.push_back(tokenizer.encode(kg.relation_phrase(r)));
}

TextTower::TextTower(std::string prefix, const TextEncoderConfig& config, Rng& rng)
    : prefix_(std::move(prefix)), config_(config) {
  const std::size_t d = config.dim;
  if (config.mode == TextMode::transformer_lite) {
    // Name and relation are never cut, so sequences may run past max_length.
    positions_ = random_matrix(2 * config.max_length, d, 0.02, rng);
    for (std::size_t l = 0; l < config.layers; ++l) {
      Layer layer;
      layer.wq = xavier(d, d, rng);
      layer.wk = xavier(d, d, rng);
      layer.wv = xavier(d, d, rng);
      layer.wo = xavier(d, d, rng);
      layer.w1 = xavier(d, config.ff_width, rng);
      layer.b1 = ad::Tensor::zeros(1, config.ff_width, true);
      layer.w2 = xavier(config.ff_width, d, rng);
      layer.b2 = ad::Tensor::zeros(1, d, true);
      layers_.push_back(std::move(layer));
    }
  }
  projection_ = xavier(d, d, rng);
  bias_ = ad::Tensor::zeros(1, d, true);
}

ad::Tensor TextTower::contextualize(const ad::Tensor& embeddings, const TokenSequence& seq) const {
  const std::size_t n = seq.ids.size();
  std::vector<std::size_t> rows(seq.ids.begin(), seq.ids.end());
  std::vector<std::size_t> pos(n);
  for (std::size_t i = 0; i < n; ++i) pos[i] = std::min(i, positions_.rows() - 1);
  ad::Tensor x = ad::add(ad::gather_rows(embeddings, rows), ad::gather_rows(positions_, pos));

  const std::size_t d = config_.dim;
  const std::size_t dh = d / config_.heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  for (const Layer& layer : layers_) {
    ad::Tensor h = ad::layer_norm_rows(x);
    ad::Tensor q = ad::matmul(h, layer.wq);
    ad::Tensor k = ad::matmul(h, layer.wk);
    ad::Tensor v = ad::matmul(h, layer.wv);
    std::vector<ad::Tensor> heads;
    for (std::size_t i = 0; i < config_.heads; ++i) {
      ad::Tensor qi = ad::slice_cols(q, i * dh, dh);
      ad::Tensor ki = ad::slice_cols(k, i * dh, dh);
      ad::Tensor vi = ad::slice_cols(v, i * dh, dh);
      ad::Tensor att = ad::softmax_rows(ad::scale(ad::matmul(qi, ad::transpose(ki)), inv_sqrt));
      heads.push_back(ad::matmul(att, vi));
    }
    x = ad::add(x, ad::matmul(ad::concat_cols(heads), layer.wo));
    ad::Tensor f = ad::relu(ad::add_row(ad::matmul(ad::layer_norm_rows(x), layer.w1), layer.b1));
    x = ad::add(x, ad::add_row(ad::matmul(f, layer.w2), layer.b2));
  }
  return ad::mean_rows(x);
}

ad::Tensor TextTower::pool(const ad::Tensor& embeddings, std::span<const TokenSequence> seqs) const {
  if (seqs.empty()) throw ContractError("cannot encode an empty batch");
  if (config_.mode == TextMode::mean_pool) {
    std::vector<std::size_t> ids;
    std::vector<std::size_t> offsets{0};
    for (const auto& s : seqs) {
      if (s.ids.empty()) throw ContractError("empty token sequence");
      ids.insert(ids.end(), s.ids.begin(), s.ids.end());
      offsets.push_back(ids.size());
    }
    return ad::embedding_bag_mean(embeddings, ids, offsets);
  }
  std::vector<ad::Tensor> rows;
  rows.reserve(seqs.size());
  for (const auto& s : seqs) {
    if (s.ids.empty()) throw ContractError("empty token sequence");
    rows.push_back(contextualize(embeddings, s));
  }
  return ad::concat_rows(rows);
}

ad::Tensor TextTower::encode(const ad::Tensor& embeddings, std::span<const TokenSequence> seqs) const {
  return ad::add_row(ad::matmul(pool(embeddings, seqs), projection_), bias_);
}

void TextTower::collect(std::vector<ad::Parameter>& out) const {
  if (positions_.defined()) out.push_back({prefix_ + ".positions", positions_, false});
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const Layer& layer = layers_[l];
    const std::string p = prefix_ + ".layer" + std::to_string(l) + ".";
    out.push_back({p + "wq", layer.wq, true});
    out.push_back({p + "wk", layer.wk, true});
    out.push_back({p + "wv", layer.wv, true});
    out.push_back({p + "wo", layer.wo, true});
    out.push_back({p + "w1", layer.w1, true});
    out.push_back({p + "b1", layer.b1, false});
    out.push_back({p + "w2", layer.w2, true});
    out.push_back({p + "b2", layer.b2, false});
  }
  out.push_back({prefix_ + ".projection", projection_, true});
  out.push_back({prefix_ + ".bias", bias_, false});
}

TextEncoder::TextEncoder(const TextEncoderConfig& config, Tokenizer tokenizer, Rng& rng)
    : config_((config.validate(), config)),
      tokenizer_(std::move(tokenizer)),
      embeddings_(random_matrix(tokenizer_.vocab_size(), config.dim,
                                1.0 / std::sqrt(static_cast<double>(config.dim)), rng)),
      head_tower_("text.head", config, rng),
      tail_tower_("text.tail", config, rng) {}

TokenSequence TextEncoder::head_tokens(std::string_view name, std::string_view desc,
                                       std::string_view relation_phrase) const {
  return head_sequence(tokenizer_.encode(name), tokenizer_.encode(desc),
                       tokenizer_.encode(relation_phrase), config_.max_length);
}

TokenSequence TextEncoder::tail_tokens(std::string_view name, std::string_view desc) const {
  return tail_sequence(tokenizer_.encode(name), tokenizer_.encode(desc), config_.max_length);
}

ad::Tensor TextEncoder::encode_head(std::string_view name, std::string_view desc,
                                    std::string_view relation_phrase) const {
  const TokenSequence seq = head_tokens(name, desc, relation_phrase);
  return encode_heads({&seq, 1});
}

ad::Tensor TextEncoder::encode_tail(std::string_view name, std::string_view desc) const {
  const TokenSequence seq = tail_tokens(name, desc);
  return encode_tails({&seq, 1});
}

ad::Tensor TextEncoder::pooled_head(std::string_view name, std::string_view desc,
                                    std::string_view relation_phrase) const {
  const TokenSequence seq = head_tokens(name, desc, relation_phrase);
  return head_tower_.pool(embeddings_, {&seq, 1});
}

ad::Tensor TextEncoder::encode_heads(std::span<const TokenSequence> seqs) const {
  return head_tower_.encode(embeddings_, seqs);
}

ad::Tensor TextEncoder::encode_tails(std::span<const TokenSequence> seqs) const {
  return tail_tower_.encode(embeddings_, seqs);
}

std::vector<ad::Parameter> TextEncoder::parameters() const {
  std::vector<ad::Parameter> out;
  out.push_back({"text.embeddings", embeddings_, false});
  head_tower_.collect(out);
  tail_tower_.collect(out);
  return out;
}

}  // namespace nnkgc::text
