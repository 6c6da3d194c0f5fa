#include "nnkgc/text/tokenizer.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "nnkgc/errors.hpp"

namespace nnkgc::text {

namespace {

const char* const kReservedNames[kReservedTokens] = {"[PAD]", "[UNK]", "[SEP]"};

bool is_word_byte(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c >= 0x80;
}

}  // namespace

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  std::string current;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (is_word_byte(c)) {
      current += (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : ch;
    } else if (!current.empty()) {
      words.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) words.push_back(std::move(current));
  return words;
}

Tokenizer::Tokenizer() : Tokenizer(std::vector<std::string>{}) {}

Tokenizer::Tokenizer(std::vector<std::string> tokens) {
  std::sort(tokens.begin(), tokens.end());
  tokens.erase(std::unique(tokens.begin(), tokens.end()), tokens.end());
  id_to_token_.reserve(kReservedTokens + tokens.size());
  for (const char* name : kReservedNames) id_to_token_.emplace_back(name);
  for (auto& t : tokens) {
    if (t.empty() || std::find(std::begin(kReservedNames), std::end(kReservedNames), t) !=
                         std::end(kReservedNames)) {
      continue;
    }
    id_to_token_.push_back(std::move(t));
  }
  for (std::size_t i = 0; i < id_to_token_.size(); ++i) {
    token_to_id_.emplace(id_to_token_[i], static_cast<TokenId>(i));
  }
}

TokenId Tokenizer::id_of(std::string_view token) const {
  auto it = token_to_id_.find(std::string(token));
  return it == token_to_id_.end() ? kUnk : it->second;
}

std::vector<TokenId> Tokenizer::encode(std::string_view text) const {
  std::vector<TokenId> ids;
  for (const auto& w : split_words(text)) ids.push_back(id_of(w));
  return ids;
}

void Tokenizer::write(std::ostream& out) const {
  for (std::size_t i = 0; i < id_to_token_.size(); ++i) out << id_to_token_[i] << '\t' << i << '\n';
}

void Tokenizer::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw DatasetError("cannot write " + path.string());
  write(out);
}

Tokenizer Tokenizer::read(std::istream& in) {
  std::vector<std::pair<std::size_t, std::string>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto tab = line.rfind('\t');
    if (tab == std::string::npos) throw ParseError("vocab", line_no, "expected token TAB id");
    rows.emplace_back(std::stoul(line.substr(tab + 1)), line.substr(0, tab));
  }
  std::sort(rows.begin(), rows.end());
  std::vector<std::string> tokens;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].first != i) throw ParseError("vocab", i + 1, "token ids are not dense");
    if (i >= kReservedTokens) tokens.push_back(rows[i].second);
  }
  Tokenizer t(std::move(tokens));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (i >= t.vocab_size() || t.token(static_cast<TokenId>(i)) != rows[i].second) {
      throw ParseError("vocab", i + 1, "ids do not follow sorted token order");
    }
  }
  return t;
}

Tokenizer Tokenizer::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DatasetError("cannot open " + path.string());
  return read(in);
}

std::map<std::string, std::size_t> count_words(const kg::KnowledgeGraph& kg) {
  std::map<std::string, std::size_t> counts;
  for (const auto& e : kg.entities()) {
    for (auto& w : split_words(e.name)) ++counts[w];
    for (auto& w : split_words(e.description)) ++counts[w];
  }
  for (std::size_t r = 0; r < kg.relation_count(); ++r) {
    for (auto& w : split_words(kg.relation_phrase(static_cast<kg::RelationId>(r)))) ++counts[w];
  }
  return counts;
}

Tokenizer build_vocab(const kg::KnowledgeGraph& kg, std::size_t min_frequency) {
  std::vector<std::string> tokens;
  for (auto& [word, n] : count_words(kg)) {
    if (n >= min_frequency) tokens.push_back(word);
  }
  return Tokenizer(std::move(tokens));
}

}  // namespace nnkgc::text
