#include "nnkgc/train/ranking.hpp"

#include <algorithm>
#include <cmath>

namespace nnkgc::train {

RankingMetrics metrics_from_ranks(std::span<const std::size_t> ranks) {
  RankingMetrics m;
  m.queries = ranks.size();
  if (ranks.empty()) return m;
  for (std::size_t r : ranks) {
    m.mrr += 1.0 / static_cast<double>(r);
    m.hits1 += r <= 1;
    m.hits3 += r <= 3;
    m.hits10 += r <= 10;
  }
  const double n = static_cast<double>(ranks.size());
  m.mrr /= n;
  m.hits1 /= n;
  m.hits3 /= n;
  m.hits10 /= n;
  return m;
}

std::size_t rank_tail(std::span<const double> scores, kg::EntityId gold,
                      std::span<const kg::EntityId> filtered) {
  if (gold >= scores.size()) return scores.size();
  const double s = scores[gold];
  if (std::isnan(s)) return scores.size();
  std::size_t rank = 1;
  for (std::size_t j = 0; j < scores.size(); ++j) {
    if (j == gold || scores[j] < s) continue;
    if (std::binary_search(filtered.begin(), filtered.end(), static_cast<kg::EntityId>(j))) continue;
    ++rank;
  }
  return rank;
}

}  // namespace nnkgc::train
