#include "nnkgc/kg/knowledge_graph.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>

#include "nnkgc/errors.hpp"

namespace nnkgc::kg {

namespace {

std::uint64_t filter_key(EntityId head, RelationId relation) {
  return (static_cast<std::uint64_t>(head) << 32) | relation;
}

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find('\t', start);
    if (pos == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

std::ifstream open_or_throw(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DatasetError("cannot open " + path.string());
  return in;
}

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

struct RawTriple {
  std::string head, relation, tail;
};

std::vector<RawTriple> read_triples(const std::filesystem::path& path) {
  auto in = open_or_throw(path);
  std::vector<RawTriple> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (line.empty()) continue;
    const auto fields = split_tabs(line);
    if (fields.size() != 3) {
      throw ParseError(path.string(), line_no,
                       "expected 3 tab-separated fields (head, relation, tail), found " +
                           std::to_string(fields.size()));
    }
    if (fields[0].empty() || fields[1].empty() || fields[2].empty()) {
      throw ParseError(path.string(), line_no, "empty field in triple");
    }
    out.push_back({std::string(fields[0]), std::string(fields[1]), std::string(fields[2])});
  }
  return out;
}

struct TextColumns {
  std::string name;
  std::string description;
};

// id TAB name [TAB description]
std::unordered_map<std::string, TextColumns> read_entity_texts(const std::filesystem::path& path) {
  auto in = open_or_throw(path);
  std::unordered_map<std::string, TextColumns> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (line.empty()) continue;
    const auto fields = split_tabs(line);
    if (fields.size() < 2 || fields.size() > 3 || fields[0].empty()) {
      throw ParseError(path.string(), line_no, "expected id TAB name TAB description");
    }
    TextColumns cols{std::string(fields[1]), fields.size() == 3 ? std::string(fields[2]) : ""};
    out.insert_or_assign(std::string(fields[0]), std::move(cols));
  }
  return out;
}

}  // namespace

std::string_view split_name(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::valid: return "valid";
    case Split::test: return "test";
  }
  return "?";
}

Split parse_split(std::string_view name) {
  if (name == "train") return Split::train;
  if (name == "valid") return Split::valid;
  if (name == "test") return Split::test;
  throw ConfigError("unknown split '" + std::string(name) + "' (expected train, valid or test)");
}

DatasetPaths DatasetPaths::in_directory(const std::filesystem::path& dir, std::string entity_file) {
  DatasetPaths p;
  p.train = dir / "train.txt";
  p.valid = dir / "valid.txt";
  p.test = dir / "test.txt";
  p.entity_text = dir / entity_file;
  return p;
}

Manifest Manifest::read(const std::filesystem::path& path) {
  auto in = open_or_throw(path);
  Manifest m;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(path.string(), line_no, "expected key=value");
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    std::size_t n = 0;
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), n);
    if (ec != std::errc{} || ptr != value.data() + value.size()) {
      // Non-count fields (paths, notes) are tolerated.
      continue;
    }
    if (key == "entities") m.entities = n;
    else if (key == "relations") m.relations = n;
    else if (key == "train") m.train = n;
    else if (key == "valid") m.valid = n;
    else if (key == "test") m.test = n;
    else if (key == "vocab") m.vocab = n;
  }
  return m;
}

std::map<std::string, std::size_t> Manifest::fields() const {
  std::map<std::string, std::size_t> out;
  if (entities) out["entities"] = *entities;
  if (relations) out["relations"] = *relations;
  if (train) out["train"] = *train;
  if (valid) out["valid"] = *valid;
  if (test) out["test"] = *test;
  if (vocab) out["vocab"] = *vocab;
  return out;
}

void Manifest::write(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw DatasetError("cannot write " + path.string());
  // Fixed order so manifests diff cleanly.
  const std::pair<const char*, const std::optional<std::size_t>*> order[] = {
      {"entities", &entities}, {"relations", &relations}, {"train", &train},
      {"valid", &valid},       {"test", &test},           {"vocab", &vocab}};
  for (const auto& [key, value] : order) {
    if (*value) out << key << '=' << **value << '\n';
  }
}

RelationId KnowledgeGraph::inverse_of(RelationId r) const {
  if (!has_inverse_relations()) throw ContractError("inverse_of: graph has no inverse relations");
  if (r >= relation_keys_.size()) throw LookupError("unknown relation id " + std::to_string(r));
  return is_inverse(r) ? static_cast<RelationId>(r - base_relations_)
                       : static_cast<RelationId>(r + base_relations_);
}

std::string KnowledgeGraph::relation_phrase(RelationId r) const {
  const RelationId base = is_inverse(r) ? static_cast<RelationId>(r - base_relations_) : r;
  std::string phrase;
  bool pending_space = false;
  for (char c : relation_keys_.at(base)) {
    if (c == '/' || c == '_' || c == '.' || c == ' ') {
      pending_space = !phrase.empty();
      continue;
    }
    if (pending_space) phrase += ' ';
    pending_space = false;
    phrase += c;
  }
  return is_inverse(r) ? "inverse " + phrase : phrase;
}

std::optional<EntityId> KnowledgeGraph::find_entity(std::string_view key) const {
  auto it = entity_lookup_.find(std::string(key));
  if (it == entity_lookup_.end()) return std::nullopt;
  return it->second;
}

std::optional<RelationId> KnowledgeGraph::find_relation(std::string_view key) const {
  auto it = relation_lookup_.find(std::string(key));
  if (it == relation_lookup_.end()) return std::nullopt;
  return it->second;
}

std::span<const Triple> KnowledgeGraph::triples(Split split) const {
  switch (split) {
    case Split::train: return train_;
    case Split::valid: return valid_;
    case Split::test: return test_;
  }
  return {};
}

bool KnowledgeGraph::has_train_edge(EntityId a, EntityId b) const {
  const auto& inc = adjacency_.at(a);
  auto it = std::lower_bound(inc.begin(), inc.end(), b,
                             [](const Incidence& x, EntityId v) { return x.other < v; });
  for (; it != inc.end() && it->other == b; ++it) {
    if (it->outgoing) return true;
  }
  return false;
}

std::span<const EntityId> KnowledgeGraph::true_tails(EntityId head, RelationId relation) const {
  auto it = filter_.find(filter_key(head, relation));
  if (it == filter_.end()) return {};
  return it->second;
}

std::vector<ManifestMismatch> KnowledgeGraph::check_manifest(
    const Manifest& expected, std::optional<std::size_t> vocab_size) const {
  std::vector<ManifestMismatch> diffs;
  auto check = [&](const char* field, const std::optional<std::size_t>& want, std::size_t got) {
    if (want && *want != got) diffs.push_back({field, *want, got});
  };
  check("entities", expected.entities, entity_count());
  check("relations", expected.relations, base_relation_count());
  check("train", expected.train, train_.size());
  check("valid", expected.valid, valid_.size());
  check("test", expected.test, test_.size());
  if (vocab_size) check("vocab", expected.vocab, *vocab_size);
  return diffs;
}

void KnowledgeGraph::build_indexes() {
  adjacency_.assign(entities_.size(), {});
  for (const Triple& t : train_) {
    adjacency_[t.head].push_back({t.relation, t.tail, true});
    adjacency_[t.tail].push_back({t.relation, t.head, false});
  }
  for (auto& inc : adjacency_) {
    std::sort(inc.begin(), inc.end(), [](const Incidence& a, const Incidence& b) {
      if (a.other != b.other) return a.other < b.other;
      if (a.relation != b.relation) return a.relation < b.relation;
      return a.outgoing > b.outgoing;
    });
  }

  seen_in_train_.assign(entities_.size(), 0);
  for (const Triple& t : train_) seen_in_train_[t.head] = seen_in_train_[t.tail] = 1;
  unseen_.clear();
  std::vector<std::uint8_t> listed(entities_.size(), 0);
  for (const auto* split : {&valid_, &test_}) {
    for (const Triple& t : *split) {
      for (EntityId e : {t.head, t.tail}) {
        if (!seen_in_train_[e] && !listed[e]) {
          listed[e] = 1;
          unseen_.push_back(e);
        }
      }
    }
  }
  build_filter_index(*this);
}

void build_filter_index(KnowledgeGraph& kg) {
  kg.filter_.clear();
  const bool inverse = kg.has_inverse_relations();
  for (const auto* split : {&kg.train_, &kg.valid_, &kg.test_}) {
    for (const Triple& t : *split) {
      kg.filter_[filter_key(t.head, t.relation)].push_back(t.tail);
      if (inverse) {
        const auto inv = static_cast<RelationId>(t.relation + kg.base_relations_);
        kg.filter_[filter_key(t.tail, inv)].push_back(t.head);
      }
    }
  }
  for (auto& [key, tails] : kg.filter_) {
    std::sort(tails.begin(), tails.end());
    tails.erase(std::unique(tails.begin(), tails.end()), tails.end());
  }
}

KnowledgeGraph load_dataset(const DatasetPaths& paths) {
  const auto train = read_triples(paths.train);
  if (train.empty()) throw DatasetError("empty dataset: no triples in " + paths.train.string());
  const auto valid = read_triples(paths.valid);
  const auto test = read_triples(paths.test);
  auto texts = read_entity_texts(paths.entity_text);
  if (!paths.entity_description.empty()) {
    for (auto& [key, cols] : read_entity_texts(paths.entity_description)) {
      auto it = texts.find(key);
      if (it != texts.end()) it->second.description = std::move(cols.name);
    }
  }

  KnowledgeGraphBuilder builder;
  std::unordered_map<std::string, EntityId> entity_ids;
  std::unordered_map<std::string, RelationId> relation_ids;
  std::vector<std::string> missing;

  auto entity_id = [&](const std::string& key) {
    auto it = entity_ids.find(key);
    if (it != entity_ids.end()) return it->second;
    auto text = texts.find(key);
    EntityId id;
    if (text == texts.end()) {
      missing.push_back(key);
      id = builder.add_entity(key, "", "");
    } else {
      id = builder.add_entity(key, text->second.name, text->second.description);
    }
    entity_ids.emplace(key, id);
    return id;
  };
  auto relation_id = [&](const std::string& key) {
    auto it = relation_ids.find(key);
    if (it != relation_ids.end()) return it->second;
    const RelationId id = builder.add_relation(key);
    relation_ids.emplace(key, id);
    return id;
  };

  const std::pair<Split, const std::vector<RawTriple>*> splits[] = {
      {Split::train, &train}, {Split::valid, &valid}, {Split::test, &test}};
  for (const auto& [split, rows] : splits) {
    for (const RawTriple& t : *rows) {
      const EntityId h = entity_id(t.head);
      const RelationId r = relation_id(t.relation);
      const EntityId tail = entity_id(t.tail);
      builder.add_triple(split, h, r, tail);
    }
  }
  if (!missing.empty()) {
    std::string msg = std::to_string(missing.size()) + " entities have no entry in " +
                      paths.entity_text.string() + ": ";
    for (std::size_t i = 0; i < std::min<std::size_t>(missing.size(), 5); ++i) {
      if (i) msg += ", ";
      msg += missing[i];
    }
    if (missing.size() > 5) msg += ", ...";
    throw MissingMetadataError(msg);
  }
  return std::move(builder).build();
}

KnowledgeGraph add_inverse_relations(KnowledgeGraph kg) {
  if (kg.has_inverse_relations()) return kg;
  for (std::size_t r = 0; r < kg.base_relations_; ++r) {
    std::string key = "inverse of " + kg.relation_keys_[r];
    kg.relation_lookup_.emplace(key, static_cast<RelationId>(kg.relation_keys_.size()));
    kg.relation_keys_.push_back(std::move(key));
  }
  build_filter_index(kg);
  return kg;
}

EntityId KnowledgeGraphBuilder::add_entity(std::string key, std::string name, std::string description) {
  const auto id = static_cast<EntityId>(kg_.entities_.size());
  if (!kg_.entity_lookup_.emplace(key, id).second) {
    throw DatasetError("duplicate entity key '" + key + "'");
  }
  kg_.entities_.push_back({std::move(key), std::move(name), std::move(description)});
  return id;
}

RelationId KnowledgeGraphBuilder::add_relation(std::string key) {
  const auto id = static_cast<RelationId>(kg_.relation_keys_.size());
  if (!kg_.relation_lookup_.emplace(key, id).second) {
    throw DatasetError("duplicate relation key '" + key + "'");
  }
  kg_.relation_keys_.push_back(std::move(key));
  kg_.base_relations_ = kg_.relation_keys_.size();
  return id;
}

void KnowledgeGraphBuilder::add_triple(Split split, EntityId head, RelationId relation, EntityId tail) {
  if (head >= kg_.entities_.size() || tail >= kg_.entities_.size()) {
    throw LookupError("add_triple: unknown entity id");
  }
  if (relation >= kg_.relation_keys_.size()) throw LookupError("add_triple: unknown relation id");
  switch (split) {
    case Split::train: kg_.train_.push_back({head, relation, tail}); break;
    case Split::valid: kg_.valid_.push_back({head, relation, tail}); break;
    case Split::test: kg_.test_.push_back({head, relation, tail}); break;
  }
}

KnowledgeGraph KnowledgeGraphBuilder::build() && {
  kg_.build_indexes();
  return std::move(kg_);
}

}  // namespace nnkgc::kg
