#include "nnkgc/train/synthetic.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <set>

#include "nnkgc/errors.hpp"
#include "nnkgc/seed.hpp"

namespace nnkgc::train {

namespace {

std::string type_word(std::size_t t) {
  static const char* words[] = {"mineral", "river", "city", "poet", "tool"};
  return t < 5 ? words[t] : "kind" + std::to_string(t);
}

std::string pseudo_word(Rng& rng) {
  static const std::string consonants = "bdfgklmnprstvz";
  static const std::string vowels = "aeiou";
  std::uniform_int_distribution<std::size_t> c(0, consonants.size() - 1), v(0, vowels.size() - 1);
  std::string w;
  for (int s = 0; s < 3; ++s) {
    w += consonants[c(rng)];
    w += vowels[v(rng)];
  }
  return w;
}

}  // namespace

SyntheticDataset generate_synthetic(const SyntheticOptions& o) {
  if (o.relations == 0 || o.entities < 2 * o.relations)
    throw ConfigError("synthetic graph needs relations > 0 and at least two entities per type");
  const std::size_t per_type = o.entities / o.relations;
  const std::size_t capacity = o.relations * per_type * per_type;
  const std::size_t wanted = o.train + o.valid + o.test;
  if (wanted > capacity)
    throw ConfigError("synthetic graph can hold at most " + std::to_string(capacity) + " triples");

  Rng rng = make_rng(o.seed, "synthetic");
  SyntheticDataset data;
  std::set<std::string> used;
  for (std::size_t i = 0; i < o.entities; ++i) {
    std::string name;
    do name = pseudo_word(rng);
    while (!used.insert(name).second);
    data.entities.push_back({"e" + std::to_string(i), name, ""});
  }
  for (std::size_t r = 0; r < o.relations; ++r) data.relations.push_back("has_" + type_word(r));

  std::vector<kg::Triple> candidates;
  for (std::size_t r = 0; r < o.relations; ++r)
    for (std::size_t h = 0; h < o.entities; ++h)
      for (std::size_t t = 0; t < o.entities; ++t)
        if (h % o.relations == (r + 1) % o.relations && t % o.relations == r && h != t)
          candidates.push_back({static_cast<kg::EntityId>(h), static_cast<kg::RelationId>(r),
                                static_cast<kg::EntityId>(t)});

  // Draw until every held-out entity also appears in train.
  for (int attempt = 0;; ++attempt) {
    if (attempt == 1000) throw std::runtime_error("could not draw a transductive synthetic split");
    std::shuffle(candidates.begin(), candidates.end(), rng);
    std::vector<kg::Triple> train(candidates.begin(), candidates.begin() + o.train);
    std::vector<kg::Triple> valid(candidates.begin() + o.train, candidates.begin() + o.train + o.valid);
    std::vector<kg::Triple> test(candidates.begin() + o.train + o.valid, candidates.begin() + wanted);
    std::vector<bool> seen(o.entities, false);
    for (const auto& t : train) seen[t.head] = seen[t.tail] = true;
    bool ok = true;
    for (const auto* split : {&valid, &test})
      for (const auto& t : *split) ok = ok && seen[t.head] && seen[t.tail];
    if (!ok) continue;
    data.train = std::move(train);
    data.valid = std::move(valid);
    data.test = std::move(test);
    break;
  }

  std::vector<std::set<kg::EntityId>> linked(o.entities);
  for (const auto* split : {&data.train, &data.valid, &data.test})
    for (const auto& t : *split) {
      linked[t.head].insert(t.tail);
      linked[t.tail].insert(t.head);
    }
  for (std::size_t i = 0; i < o.entities; ++i) {
    std::string desc = type_word(i % o.relations) + " linked with";
    for (kg::EntityId e : linked[i]) desc += " " + data.entities[e].name;
    data.entities[i].description = std::move(desc);
  }
  return data;
}

kg::KnowledgeGraph to_knowledge_graph(const SyntheticDataset& data) {
  kg::KnowledgeGraphBuilder b;
  for (const auto& e : data.entities) b.add_entity(e.key, e.name, e.description);
  for (const auto& r : data.relations) b.add_relation(r);
  for (const auto& t : data.train) b.add_triple(kg::Split::train, t.head, t.relation, t.tail);
  for (const auto& t : data.valid) b.add_triple(kg::Split::valid, t.head, t.relation, t.tail);
  for (const auto& t : data.test) b.add_triple(kg::Split::test, t.head, t.relation, t.tail);
  return std::move(b).build();
}

void write_synthetic(const SyntheticDataset& data, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto write_split = [&](const char* file, const std::vector<kg::Triple>& triples) {
    std::ofstream out(dir / file, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + (dir / file).string());
    for (const auto& t : triples)
      out << data.entities[t.head].key << '\t' << data.relations[t.relation] << '\t'
          << data.entities[t.tail].key << '\n';
  };
  write_split("train.txt", data.train);
  write_split("valid.txt", data.valid);
  write_split("test.txt", data.test);
  std::ofstream out(dir / "entity_texts.tsv", std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + (dir / "entity_texts.tsv").string());
  for (const auto& e : data.entities) out << e.key << '\t' << e.name << '\t' << e.description << '\n';
}

}  // namespace nnkgc::train
