#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "nnkgc/kg/knowledge_graph.hpp"

namespace nnkgc::text {

using TokenId = std::uint32_t;

inline constexpr TokenId kPad = 0;
inline constexpr TokenId kUnk = 1;
inline constexpr TokenId kSep = 2;
inline constexpr std::size_t kReservedTokens = 3;

// Lowercases ASCII and splits on anything that is not a letter or digit.
// Bytes >= 0x80 are kept inside words so UTF-8 text stays intact.
std::vector<std::string> split_words(std::string_view text);

class Tokenizer {
 public:
  Tokenizer();
  // Regular tokens get ids kReservedTokens.. in lexicographic order.
  explicit Tokenizer(std::vector<std::string> tokens);

  std::size_t vocab_size() const noexcept { return id_to_token_.size(); }
  std::vector<TokenId> encode(std::string_view text) const;
  TokenId id_of(std::string_view token) const;
  const std::string& token(TokenId id) const { return id_to_token_.at(id); }

  // token TAB id, one per line, sorted by token.
  void save(const std::filesystem::path& path) const;
  void write(std::ostream& out) const;
  static Tokenizer load(const std::filesystem::path& path);
  static Tokenizer read(std::istream& in);

  friend bool operator==(const Tokenizer& a, const Tokenizer& b) {
    return a.id_to_token_ == b.id_to_token_;
  }

 private:
  std::vector<std::string> id_to_token_;
  std::unordered_map<std::string, TokenId> token_to_id_;
};

// Vocabulary over entity names, descriptions and relation phrases (including
// inverse phrases when present). Words seen fewer than min_frequency times
// are left out and encode to UNK.
Tokenizer build_vocab(const kg::KnowledgeGraph& kg, std::size_t min_frequency = 1);

// Word counts behind build_vocab, exposed for reporting.
std::map<std::string, std::size_t> count_words(const kg::KnowledgeGraph& kg);

}  // namespace nnkgc::text
