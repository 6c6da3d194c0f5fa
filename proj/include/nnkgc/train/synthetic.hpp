#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "nnkgc/kg/knowledge_graph.hpp"

namespace nnkgc::train {

struct SyntheticOptions {
  std::size_t entities = 50;
  std::size_t relations = 5;
  std::size_t train = 300;
  std::size_t valid = 25;
  std::size_t test = 25;
  std::uint64_t seed = 7;
};

struct SyntheticDataset {
  std::vector<kg::EntityRecord> entities;
  std::vector<std::string> relations;
  std::vector<kg::Triple> train, valid, test;  // indices into entities / relations
};

// Typed toy graph. Entity i has type i mod relations; relation r links heads
// of type (r + 1) mod relations to tails of type r. Each description names
// the entity's type and every entity it is linked to in any split, so heads
// and their true tails share tokens. Every valid/test entity also occurs in
// train.
SyntheticDataset generate_synthetic(const SyntheticOptions& options);

kg::KnowledgeGraph to_knowledge_graph(const SyntheticDataset& data);

// train.txt, valid.txt, test.txt and entity_texts.tsv in the standard layout.
void write_synthetic(const SyntheticDataset& data, const std::filesystem::path& dir);

}  // namespace nnkgc::train
