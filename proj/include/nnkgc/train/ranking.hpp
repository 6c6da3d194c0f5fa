#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "nnkgc/kg/knowledge_graph.hpp"

namespace nnkgc::train {

struct RankingMetrics {
  double mrr = 0.0;
  double hits1 = 0.0;
  double hits3 = 0.0;
  double hits10 = 0.0;
  std::size_t queries = 0;

  double average() const noexcept { return (mrr + hits1 + hits3 + hits10) / 4.0; }
};

RankingMetrics metrics_from_ranks(std::span<const std::size_t> ranks);

// Pessimistic filtered rank: 1 + #{j ≠ gold, j not in filtered : s_j ≥ s_gold}.
// filtered must be sorted; gold is never filtered. A gold index outside the
// score range yields scores.size().
std::size_t rank_tail(std::span<const double> scores, kg::EntityId gold,
                      std::span<const kg::EntityId> filtered);

}  // namespace nnkgc::train
