#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "nnkgc/kg/knowledge_graph.hpp"
#include "nnkgc/train/config.hpp"
#include "nnkgc/train/model.hpp"
#include "nnkgc/train/ranking.hpp"

namespace nnkgc::train {

// Loss became NaN or infinite. The last good parameters have been restored
// (and saved when the trainer has an output directory).
class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EvalOptions {
  std::size_t max_queries = 0;  // 0: all triples of the split
  std::uint64_t neighborhood_seed = 0;
  std::size_t batch_size = 256;
};

struct EvalReport {
  RankingMetrics all;
  RankingMetrics forward;
  RankingMetrics inverse;
  std::vector<std::size_t> ranks;  // forward queries first, then inverse
};

// Filtered ranking over every triple of the split in both directions,
// scoring all entities by cosine(e_hr, e_t). Train-split queries hide their
// own answer edge from the neighborhood exactly as during training.
EvalReport evaluate(const Model& model, const kg::KnowledgeGraph& kg, kg::Split split,
                    const EvalOptions& options = {});

// Cosine scores of every entity for one query, plus the query encoding.
struct QueryScores {
  std::vector<double> scores;
  QueryEncoding encoding;
};
QueryScores score_query(const Model& model, const kg::KnowledgeGraph& kg, const Query& query,
                        std::uint64_t neighborhood_seed, const ad::Tensor& tail_embeddings);

std::uint64_t eval_neighborhood_seed(const RunConfig& config);

struct EpochStats {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double kg_loss = 0.0;
  double edge_loss = 0.0;
  std::optional<double> valid_mrr;
};

std::string format_epoch_line(const EpochStats& stats);

struct TrainOutcome {
  std::vector<EpochStats> epochs;
  std::vector<std::string> log_lines;
};

// Train triples in both directions, in file order.
std::vector<Query> training_queries(const kg::KnowledgeGraph& kg);

class Trainer {
 public:
  // kg must carry inverse relations and a filter index.
  Trainer(const RunConfig& config, const kg::KnowledgeGraph& kg, text::Tokenizer tokenizer);

  Model& model() noexcept { return *model_; }
  const Model& model() const noexcept { return *model_; }

  // Runs all epochs. When output_dir is set, writes checkpoint.txt, train.log
  // and config.resolved there; on_epoch sees each epoch as it finishes.
  TrainOutcome run(const std::optional<std::filesystem::path>& output_dir = std::nullopt,
                   const std::function<void(const EpochStats&)>& on_epoch = {});

  // One pass over the training queries. Exposed for tests.
  EpochStats train_epoch(std::size_t epoch);

  // One optimisation step's loss on a fixed batch (no parameter update).
  struct BatchLoss {
    ad::Tensor total;
    ad::Tensor kg;
    ad::Tensor edge;
  };
  BatchLoss batch_loss(std::span<const Query> batch, std::size_t epoch, std::size_t first_index) const;

 private:
  bool known_train_triple(kg::EntityId h, kg::RelationId r, kg::EntityId t) const;
  void snapshot();
  void restore();

  RunConfig config_;
  const kg::KnowledgeGraph& kg_;
  std::unique_ptr<Model> model_;
  std::unique_ptr<ad::AdamW> optimizer_;
  std::vector<Query> queries_;
  std::unordered_set<std::uint64_t> train_keys_;
  std::vector<std::vector<double>> last_good_;
};

}  // namespace nnkgc::train
