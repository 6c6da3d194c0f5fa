#include "nnkgc/train/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "nnkgc/autodiff/ops.hpp"
#include "nnkgc/errors.hpp"
#include "nnkgc/train/checkpoint.hpp"
#include "nnkgc/train/losses.hpp"
#include "nnkgc/vgae/vgae.hpp"

namespace nnkgc::train {

namespace {

std::vector<double> normalized_rows(const ad::Tensor& x) {
  const std::size_t m = x.rows(), n = x.cols();
  std::vector<double> out(x.values().begin(), x.values().end());
  for (std::size_t i = 0; i < m; ++i) {
    double norm = 0.0;
    for (std::size_t k = 0; k < n; ++k) norm += out[i * n + k] * out[i * n + k];
    norm = std::sqrt(norm);
    if (norm == 0.0) continue;
    for (std::size_t k = 0; k < n; ++k) out[i * n + k] /= norm;
  }
  return out;
}

std::vector<double> cosine_scores(std::span<const double> query, std::span<const double> tails,
                                  std::size_t dim) {
  const std::size_t count = tails.size() / dim;
  std::vector<double> s(count, 0.0);
  for (std::size_t e = 0; e < count; ++e) {
    double dot = 0.0;
    for (std::size_t k = 0; k < dim; ++k) dot += query[k] * tails[e * dim + k];
    s[e] = dot;
  }
  return s;
}

std::uint64_t neighborhood_seed_for(const RunConfig& c, std::size_t epoch) {
  const std::uint64_t root = c.seed.value_or(0);
  return c.resample_neighbors ? derive_seed(root, "neighbors", {epoch}) : derive_seed(root, "neighbors");
}

std::string format_value(double x) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.6f", x);
  return buf;
}

}  // namespace

std::uint64_t eval_neighborhood_seed(const RunConfig& config) {
  return derive_seed(config.seed.value_or(0), "neighbors.eval");
}

QueryScores score_query(const Model& model, const kg::KnowledgeGraph& kg, const Query& query,
                        std::uint64_t neighborhood_seed, const ad::Tensor& tail_embeddings) {
  ad::NoGradGuard guard;
  QueryScores out;
  out.encoding = model.encode_queries(kg, {&query, 1}, neighborhood_seed);
  const auto q = normalized_rows(out.encoding.e_hr);
  const auto t = normalized_rows(tail_embeddings);
  out.scores = cosine_scores(q, t, tail_embeddings.cols());
  return out;
}

EvalReport evaluate(const Model& model, const kg::KnowledgeGraph& kg, kg::Split split,
                    const EvalOptions& options) {
  if (!kg.has_inverse_relations())
    throw ContractError("evaluate: graph needs inverse relations");
  ad::NoGradGuard guard;
  auto triples = kg.triples(split);
  if (options.max_queries > 0 && triples.size() > options.max_queries)
    triples = triples.first(options.max_queries);

  std::vector<Query> queries;
  const bool hide_answer = split == kg::Split::train;
  for (const auto& t : triples) queries.push_back({t.head, t.relation, t.tail, hide_answer});
  for (const auto& t : triples)
    queries.push_back({t.tail, kg.inverse_of(t.relation), t.head, hide_answer});

  const ad::Tensor tails = model.all_tail_embeddings();
  const auto tail_norm = normalized_rows(tails);
  const std::size_t dim = tails.cols();

  EvalReport report;
  report.ranks.reserve(queries.size());
  const std::size_t step = std::max<std::size_t>(options.batch_size, 1);
  for (std::size_t begin = 0; begin < queries.size(); begin += step) {
    const std::size_t end = std::min(queries.size(), begin + step);
    const std::span<const Query> batch(queries.data() + begin, end - begin);
    const QueryEncoding enc = model.encode_queries(kg, batch, options.neighborhood_seed);
    const auto q = normalized_rows(enc.e_hr);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const auto scores = cosine_scores(std::span(q).subspan(i * dim, dim), tail_norm, dim);
      report.ranks.push_back(
          rank_tail(scores, batch[i].tail, kg.true_tails(batch[i].head, batch[i].relation)));
    }
  }
  const std::size_t half = triples.size();
  report.all = metrics_from_ranks(report.ranks);
  report.forward = metrics_from_ranks(std::span(report.ranks).first(half));
  report.inverse = metrics_from_ranks(std::span(report.ranks).subspan(half));
  return report;
}

std::string format_epoch_line(const EpochStats& s) {
  std::string line = "epoch=" + std::to_string(s.epoch) + " train_loss=" + format_value(s.train_loss) +
                     " kg_loss=" + format_value(s.kg_loss) + " edge_loss=" + format_value(s.edge_loss) +
                     " valid_mrr=" + (s.valid_mrr ? format_value(*s.valid_mrr) : std::string("NA"));
  return line;
}

std::vector<Query> training_queries(const kg::KnowledgeGraph& kg) {
  std::vector<Query> out;
  const auto train = kg.triples(kg::Split::train);
  for (const auto& t : train) out.push_back({t.head, t.relation, t.tail, true});
  for (const auto& t : train) out.push_back({t.tail, kg.inverse_of(t.relation), t.head, true});
  return out;
}

Trainer::Trainer(const RunConfig& config, const kg::KnowledgeGraph& kg, text::Tokenizer tokenizer)
    : config_(config), kg_(kg) {
  config_.validate();
  if (!kg.has_inverse_relations()) throw ContractError("Trainer: graph needs inverse relations");
  model_ = std::make_unique<Model>(config_, std::move(tokenizer), kg_);
  ad::AdamWOptions opts;
  opts.lr = config_.lr;
  opts.weight_decay = config_.weight_decay;
  optimizer_ = std::make_unique<ad::AdamW>(model_->trainable_parameters(), opts);
  queries_ = training_queries(kg_);
  for (const Query& q : queries_) train_keys_.insert((std::uint64_t{q.head} * kg_.relation_count() + q.relation) *
                                                         kg_.entity_count() + q.tail);
  snapshot();
}

bool Trainer::known_train_triple(kg::EntityId h, kg::RelationId r, kg::EntityId t) const {
  return train_keys_.contains((std::uint64_t{h} * kg_.relation_count() + r) * kg_.entity_count() + t);
}

Trainer::BatchLoss Trainer::batch_loss(std::span<const Query> batch, std::size_t epoch,
                                       std::size_t first_index) const {
  const std::uint64_t root = config_.seed.value_or(0);
  const std::size_t b = batch.size();
  Rng dropout_rng = make_rng(root, "dropout", {epoch, first_index});
  const QueryEncoding enc = model_->encode_queries(kg_, batch, neighborhood_seed_for(config_, epoch),
                                                   config_.dropout > 0.0 ? &dropout_rng : nullptr);
  std::vector<kg::EntityId> tails;
  for (const Query& q : batch) tails.push_back(q.tail);
  const ad::Tensor e_t = model_->encode_entities(tails);

  // Other known answers of the same query are not negatives.
  ad::Mask negatives = ad::Mask::all(b, b);
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t j = 0; j < b; ++j)
      if (i != j && known_train_triple(batch[i].head, batch[i].relation, batch[j].tail))
        negatives.set(i, j, false);
  BatchLoss out;
  out.kg = info_nce_loss(enc.e_hr, e_t, inverse_temperature(model_->log_inv_tau()), &negatives).loss;

  std::vector<ad::Tensor> edge_terms;
  if (const auto& vg = model_->vgae()) {
    for (std::size_t i = 0; i < b; ++i) {
      const std::uint64_t sample = first_index + i;
      auto masked = vgae::mask_edges(enc.subgraphs[i].adjacency, config_.mask_ratio,
                                     derive_seed(root, "edge_mask", {epoch, sample}));
      if (!masked) continue;
      const vgae::VgaeState state = vg->encode(enc.features[i], masked->visible);
      const ad::Tensor z = vgae::reparameterize(state, derive_seed(root, "vgae_noise", {epoch, sample}));
      edge_terms.push_back(vgae::edge_loss(state, z, masked->mask, config_.kl_beta).total);
    }
  }
  if (edge_terms.empty()) {
    out.edge = ad::Tensor::scalar(0.0);
  } else {
    out.edge = ad::scale(ad::sum(ad::concat_rows(edge_terms)), 1.0 / static_cast<double>(edge_terms.size()));
  }
  out.total = combined_loss(out.kg, out.edge, config_.lambda);
  return out;
}

void Trainer::snapshot() {
  last_good_.clear();
  for (const auto& p : model_->parameters())
    last_good_.emplace_back(p.tensor.values().begin(), p.tensor.values().end());
}

void Trainer::restore() {
  auto params = model_->parameters();
  for (std::size_t i = 0; i < params.size(); ++i)
    std::copy(last_good_[i].begin(), last_good_[i].end(), params[i].tensor.mutable_values().begin());
}

EpochStats Trainer::train_epoch(std::size_t epoch) {
  std::vector<std::size_t> order(queries_.size());
  std::iota(order.begin(), order.end(), 0);
  Rng shuffle_rng = make_rng(config_.seed.value_or(0), "shuffle", {epoch});
  std::shuffle(order.begin(), order.end(), shuffle_rng);

  // A trailing batch of one has no negatives; fold it into the previous batch.
  std::vector<std::pair<std::size_t, std::size_t>> ranges;
  for (std::size_t begin = 0; begin < order.size(); begin += config_.batch_size)
    ranges.emplace_back(begin, std::min(order.size(), begin + config_.batch_size));
  if (ranges.size() > 1 && ranges.back().second - ranges.back().first < 2) {
    ranges[ranges.size() - 2].second = ranges.back().second;
    ranges.pop_back();
  }
  if (ranges.empty() || ranges.front().second - ranges.front().first < 2)
    throw ContractError("training needs at least two queries");

  EpochStats stats;
  stats.epoch = epoch;
  double total = 0.0, kg_sum = 0.0, edge_sum = 0.0;
  for (auto [begin, end] : ranges) {
    std::vector<Query> batch;
    for (std::size_t k = begin; k < end; ++k) batch.push_back(queries_[order[k]]);
    BatchLoss loss = batch_loss(batch, epoch, begin);
    const double value = loss.total.item();
    if (!std::isfinite(value)) {
      restore();
      throw TrainingDiverged("loss became " + std::to_string(value) + " in epoch " +
                             std::to_string(epoch) + "; restored last good parameters");
    }
    loss.total.backward();
    for (auto& p : optimizer_->params())
      if (!p.tensor.has_grad()) {
        ad::Tensor t = p.tensor;
        t.zero_grad();
      }
    optimizer_->step();
    optimizer_->zero_grad();
    total += value;
    kg_sum += loss.kg.item();
    edge_sum += loss.edge.item();
  }
  const double n = static_cast<double>(ranges.size());
  stats.train_loss = total / n;
  stats.kg_loss = kg_sum / n;
  stats.edge_loss = edge_sum / n;
  return stats;
}

TrainOutcome Trainer::run(const std::optional<std::filesystem::path>& output_dir,
                          const std::function<void(const EpochStats&)>& on_epoch) {
  TrainOutcome outcome;
  std::ofstream log;
  std::filesystem::path checkpoint_path;
  if (output_dir) {
    std::filesystem::create_directories(*output_dir);
    write_config_file(config_, *output_dir / "config.resolved");
    log.open(*output_dir / "train.log", std::ios::binary | std::ios::trunc);
    checkpoint_path = *output_dir / "checkpoint.txt";
  }
  EvalOptions eval_opts;
  eval_opts.max_queries = config_.max_eval_queries;
  eval_opts.neighborhood_seed = eval_neighborhood_seed(config_);

  for (std::size_t epoch = 1; epoch <= config_.epochs; ++epoch) {
    EpochStats stats;
    try {
      stats = train_epoch(epoch);
    } catch (const TrainingDiverged&) {
      if (output_dir) save_checkpoint(checkpoint_path, config_, model_->tokenizer(), model_->parameters());
      throw;
    }
    snapshot();
    const bool eval_now = config_.eval_every > 0 &&
                          (epoch % config_.eval_every == 0 || epoch == config_.epochs) &&
                          !kg_.triples(kg::Split::valid).empty();
    if (eval_now) stats.valid_mrr = evaluate(*model_, kg_, kg::Split::valid, eval_opts).all.mrr;
    const std::string line = format_epoch_line(stats);
    outcome.log_lines.push_back(line);
    outcome.epochs.push_back(stats);
    if (log) {
      log << line << '\n';
      log.flush();
    }
    if (on_epoch) on_epoch(stats);
  }
  if (output_dir) save_checkpoint(checkpoint_path, config_, model_->tokenizer(), model_->parameters());
  return outcome;
}

}  // namespace nnkgc::train
