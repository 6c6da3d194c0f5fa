#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace nnkgc::kg {

using EntityId = std::uint32_t;
using RelationId = std::uint32_t;

struct Triple {
  EntityId head = 0;
  RelationId relation = 0;
  EntityId tail = 0;

  friend bool operator==(const Triple&, const Triple&) = default;
  friend auto operator<=>(const Triple&, const Triple&) = default;
};

struct EntityRecord {
  std::string key;  // identifier as it appears in the triple files
  std::string name;
  std::string description;
};

enum class Split { train, valid, test };

std::string_view split_name(Split split);
Split parse_split(std::string_view name);

// One train edge seen from an endpoint.
struct Incidence {
  RelationId relation;  // always a base relation
  EntityId other;
  bool outgoing;        // true: this entity is the head of the triple
};

struct DatasetPaths {
  std::filesystem::path train;
  std::filesystem::path valid;
  std::filesystem::path test;
  std::filesystem::path entity_text;
  // Optional id TAB description file overriding descriptions from entity_text
  // (FB15k-237 ships names and long descriptions separately).
  std::filesystem::path entity_description;

  // Standard layout: train.txt, valid.txt, test.txt and entity_texts.tsv under dir.
  static DatasetPaths in_directory(const std::filesystem::path& dir,
                                   std::string entity_file = "entity_texts.tsv");
};

// Expected counts from a dataset manifest. Absent fields are not checked.
struct Manifest {
  std::optional<std::size_t> entities;
  std::optional<std::size_t> relations;
  std::optional<std::size_t> train;
  std::optional<std::size_t> valid;
  std::optional<std::size_t> test;
  std::optional<std::size_t> vocab;

  static Manifest read(const std::filesystem::path& path);
  void write(const std::filesystem::path& path) const;
  std::map<std::string, std::size_t> fields() const;
};

struct ManifestMismatch {
  std::string field;
  std::size_t expected;
  std::size_t actual;
};

class KnowledgeGraph {
 public:
  std::size_t entity_count() const noexcept { return entities_.size(); }
  // Includes synthesized inverse relations once add_inverse_relations has run.
  std::size_t relation_count() const noexcept { return relation_keys_.size(); }
  std::size_t base_relation_count() const noexcept { return base_relations_; }
  bool has_inverse_relations() const noexcept { return relation_keys_.size() > base_relations_; }

  const EntityRecord& entity(EntityId id) const { return entities_.at(id); }
  std::span<const EntityRecord> entities() const noexcept { return entities_; }
  const std::string& relation_key(RelationId id) const { return relation_keys_.at(id); }
  bool is_inverse(RelationId r) const noexcept { return r >= base_relations_; }
  // Inverse of a base relation and vice versa. Requires inverse relations.
  RelationId inverse_of(RelationId r) const;
  // Whitespace-separated words describing the relation, e.g. "inverse hypernym".
  std::string relation_phrase(RelationId r) const;

  std::optional<EntityId> find_entity(std::string_view key) const;
  std::optional<RelationId> find_relation(std::string_view key) const;

  std::span<const Triple> triples(Split split) const;

  // Train-only incidences (both directions) of an entity, sorted by (other, relation, outgoing).
  std::span<const Incidence> incidences(EntityId e) const { return adjacency_.at(e); }
  // True if some train triple links a → b (base relations only).
  bool has_train_edge(EntityId a, EntityId b) const;

  // Sorted gold tails for (head, relation) over all splits. Empty when absent.
  std::span<const EntityId> true_tails(EntityId head, RelationId relation) const;

  // Entities that occur in valid/test but never in train.
  std::span<const EntityId> unseen_entities() const noexcept { return unseen_; }
  bool seen_in_train(EntityId e) const { return seen_in_train_.at(e) != 0; }

  std::vector<ManifestMismatch> check_manifest(const Manifest& expected,
                                               std::optional<std::size_t> vocab_size = {}) const;

  // Construction goes through load_dataset or KnowledgeGraphBuilder.
  friend KnowledgeGraph load_dataset(const DatasetPaths& paths);
  friend KnowledgeGraph add_inverse_relations(KnowledgeGraph kg);
  friend void build_filter_index(KnowledgeGraph& kg);
  friend class KnowledgeGraphBuilder;

 private:
  void build_indexes();

  std::vector<EntityRecord> entities_;
  std::unordered_map<std::string, EntityId> entity_lookup_;
  std::vector<std::string> relation_keys_;
  std::unordered_map<std::string, RelationId> relation_lookup_;
  std::size_t base_relations_ = 0;
  std::vector<Triple> train_, valid_, test_;
  std::vector<std::vector<Incidence>> adjacency_;
  std::unordered_map<std::uint64_t, std::vector<EntityId>> filter_;
  std::vector<EntityId> unseen_;
  std::vector<std::uint8_t> seen_in_train_;
};

// In-memory construction, used by the synthetic generator and tests.
class KnowledgeGraphBuilder {
 public:
  EntityId add_entity(std::string key, std::string name, std::string description = {});
  RelationId add_relation(std::string key);
  void add_triple(Split split, EntityId head, RelationId relation, EntityId tail);
  KnowledgeGraph build() &&;

 private:
  KnowledgeGraph kg_;
};

// Parses tab-separated head/relation/tail files and the id/name/description
// entity file. Ids are assigned in first-appearance order over train, valid,
// test. Throws ParseError (with line number), MissingMetadataError, or
// DatasetError for an empty train split.
KnowledgeGraph load_dataset(const DatasetPaths& paths);

// Adds "inverse of r" for every base relation and registers (t, r⁻¹, h) in
// the filter index. Calling it on a graph that already has inverses is a no-op.
KnowledgeGraph add_inverse_relations(KnowledgeGraph kg);

// Rebuilds (h, r) → true tails over train ∪ valid ∪ test, including inverse
// forms when the graph has inverse relations.
void build_filter_index(KnowledgeGraph& kg);

}  // namespace nnkgc::kg
