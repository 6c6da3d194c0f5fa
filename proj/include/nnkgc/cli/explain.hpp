#pragma once

#include <cstddef>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "nnkgc/kg/knowledge_graph.hpp"
#include "nnkgc/train/model.hpp"

namespace nnkgc::cli {

struct ScoredEntity {
  kg::EntityId id = 0;
  std::string key;
  std::string name;
  double score = 0.0;
  std::size_t rank = 0;  // filtered, pessimistic
  bool is_gold = false;
};

struct NeighborEntry {
  kg::EntityId id = 0;
  std::string key;
  std::string name;
  std::string description;
  int hop = 0;
  std::size_t degree = 0;
  std::optional<double> attention;
  // e.g. "hypernym" or "inverse hypernym", relative to the entity it was reached from.
  std::string relation;
  std::string via;
  std::vector<std::string> highlights;       // overlap with the top prediction's name
  std::vector<std::string> gold_highlights;  // overlap with the gold tail's name
};

struct ExplanationReport {
  std::string head_key;
  std::string head_name;
  std::string head_description;
  std::string relation;
  std::vector<ScoredEntity> predictions;  // descending score
  std::optional<ScoredEntity> gold;
  bool gold_in_top = false;
  std::vector<NeighborEntry> neighbors;
  bool empty_neighborhood = false;
  bool truncated_neighborhood = false;
};

// Case-insensitive word overlap of text with target, in order of first occurrence in text.
std::vector<std::string> highlight_tokens(std::string_view text, std::string_view target);

// Resolves an entity by key, exact name (case-insensitive) or numeric id.
// Throws LookupError with the closest names as suggestions.
kg::EntityId resolve_entity(const kg::KnowledgeGraph& kg, std::string_view query);
// Resolves a relation by key, phrase, "inverse of <key>" or numeric id.
kg::RelationId resolve_relation(const kg::KnowledgeGraph& kg, std::string_view query);

// gold defaults to the first known true tail of (head, relation), if any.
ExplanationReport explain(const train::Model& model, const kg::KnowledgeGraph& kg, kg::EntityId head,
                          kg::RelationId relation, std::size_t top_n,
                          std::optional<kg::EntityId> gold = std::nullopt);

void render_text(const ExplanationReport& report, std::ostream& out);
nlohmann::json to_json(const ExplanationReport& report);

}  // namespace nnkgc::cli
