#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "nnkgc/kg/knowledge_graph.hpp"

namespace nnkgc::kg {

// Dense 0/1 directed adjacency over the nodes of a neighborhood.
class DenseAdjacency {
 public:
  DenseAdjacency() = default;
  explicit DenseAdjacency(std::size_t n) : n_(n), data_(n * n, 0) {}

  std::size_t size() const noexcept { return n_; }
  bool operator()(std::size_t i, std::size_t j) const { return data_[i * n_ + j] != 0; }
  void set(std::size_t i, std::size_t j, bool on = true) { data_[i * n_ + j] = on ? 1 : 0; }
  std::size_t edge_count() const;
  // Directed edges (i, j) in row-major order.
  std::vector<std::pair<std::size_t, std::size_t>> edges() const;
  // max(A, Aᵀ)
  DenseAdjacency symmetrized() const;
  // Reorders nodes: result(i, j) = this(order[i], order[j]).
  DenseAdjacency permuted(const std::vector<std::size_t>& order) const;

  friend bool operator==(const DenseAdjacency&, const DenseAdjacency&) = default;

 private:
  std::size_t n_ = 0;
  std::vector<std::uint8_t> data_;
};

struct NeighborhoodSubgraph {
  std::vector<EntityId> nodes;  // nodes[0] is the head
  DenseAdjacency adjacency;     // (i, j) = 1 iff a train triple links nodes[i] → nodes[j]
  std::vector<int> hop_of;
  bool truncated = false;

  std::size_t size() const noexcept { return nodes.size(); }
};

inline constexpr std::size_t kNoCap = std::numeric_limits<std::size_t>::max();

struct NeighborhoodOptions {
  int hops = 1;
  std::size_t cap_per_hop = 32;
  std::uint64_t seed = 0;
  // Train edges between the head and this entity are ignored, so a training
  // query never sees its own answer edge.
  std::optional<EntityId> exclude_link_to;
};

// Breadth-first k-hop expansion around head. Edges are traversed in both
// directions for discovery; the adjacency keeps their original direction and
// is induced over all retained nodes (self-loops are not stored). A hop
// frontier larger than cap_per_hop is uniformly subsampled with a generator
// seeded from options.seed. Nodes are ordered by hop, then by entity id.
NeighborhoodSubgraph khop_neighborhood(const KnowledgeGraph& kg, EntityId head,
                                       const NeighborhoodOptions& options);

}  // namespace nnkgc::kg
