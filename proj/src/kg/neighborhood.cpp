#include "nnkgc/kg/neighborhood.hpp"

#include <algorithm>
#include <unordered_map>

#include "nnkgc/errors.hpp"
#include "nnkgc/seed.hpp"

namespace nnkgc::kg {

std::size_t DenseAdjacency::edge_count() const {
  return static_cast<std::size_t>(std::count(data_.begin(), data_.end(), std::uint8_t{1}));
}

std::vector<std::pair<std::size_t, std::size_t>> DenseAdjacency::edges() const {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t j = 0; j < n_; ++j)
      if ((*this)(i, j)) out.emplace_back(i, j);
  return out;
}

DenseAdjacency DenseAdjacency::symmetrized() const {
  DenseAdjacency out(n_);
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t j = 0; j < n_; ++j)
      if ((*this)(i, j) || (*this)(j, i)) out.set(i, j);
  return out;
}

DenseAdjacency DenseAdjacency::permuted(const std::vector<std::size_t>& order) const {
  if (order.size() != n_) throw DimensionError("permuted: order size does not match adjacency");
  DenseAdjacency out(n_);
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t j = 0; j < n_; ++j) out.set(i, j, (*this)(order[i], order[j]));
  return out;
}

NeighborhoodSubgraph khop_neighborhood(const KnowledgeGraph& kg, EntityId head,
                                       const NeighborhoodOptions& options) {
  if (head >= kg.entity_count()) {
    throw LookupError("khop_neighborhood: unknown head entity " + std::to_string(head));
  }
  if (options.hops < 1) throw ContractError("khop_neighborhood: hops must be >= 1");
  if (options.cap_per_hop < 1) throw ContractError("khop_neighborhood: cap_per_hop must be >= 1");

  const auto excluded = [&](EntityId a, EntityId b) {
    if (!options.exclude_link_to) return false;
    const EntityId x = *options.exclude_link_to;
    return (a == head && b == x) || (a == x && b == head);
  };

  NeighborhoodSubgraph sub;
  std::unordered_map<EntityId, std::size_t> position;
  sub.nodes.push_back(head);
  sub.hop_of.push_back(0);
  position.emplace(head, 0);

  Rng rng(derive_seed(options.seed, "khop", {head}));
  std::vector<EntityId> frontier{head};
  for (int hop = 1; hop <= options.hops && !frontier.empty(); ++hop) {
    std::vector<EntityId> next;
    for (EntityId u : frontier) {
      for (const Incidence& inc : kg.incidences(u)) {
        if (excluded(u, inc.other) || position.contains(inc.other)) continue;
        next.push_back(inc.other);
      }
    }
    std::sort(next.begin(), next.end());
    next.erase(std::unique(next.begin(), next.end()), next.end());
    if (next.size() > options.cap_per_hop) {
      std::shuffle(next.begin(), next.end(), rng);
      next.resize(options.cap_per_hop);
      std::sort(next.begin(), next.end());
      sub.truncated = true;
    }
    for (EntityId v : next) {
      position.emplace(v, sub.nodes.size());
      sub.nodes.push_back(v);
      sub.hop_of.push_back(hop);
    }
    frontier = std::move(next);
  }

  sub.adjacency = DenseAdjacency(sub.nodes.size());
  for (std::size_t i = 0; i < sub.nodes.size(); ++i) {
    const EntityId u = sub.nodes[i];
    for (const Incidence& inc : kg.incidences(u)) {
      if (!inc.outgoing || inc.other == u || excluded(u, inc.other)) continue;
      auto it = position.find(inc.other);
      if (it != position.end()) sub.adjacency.set(i, it->second);
    }
  }
  return sub;
}

}  // namespace nnkgc::kg
