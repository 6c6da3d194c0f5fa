#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <set>
#include <sstream>

#include "nnkgc/autodiff/gradcheck.hpp"
#include "nnkgc/autodiff/ops.hpp"
#include "nnkgc/errors.hpp"
#include "nnkgc/text/tokenizer.hpp"
#include "nnkgc/train/checkpoint.hpp"
#include "nnkgc/train/config.hpp"
#include "nnkgc/train/losses.hpp"
#include "nnkgc/train/model.hpp"
#include "nnkgc/train/ranking.hpp"
#include "nnkgc/train/synthetic.hpp"
#include "nnkgc/train/trainer.hpp"
#include "test_util.hpp"
#include "train_fixture.hpp"

using namespace nnkgc;
using namespace nnkgc::train;
using nnkgc::testing::max_abs_diff;
using nnkgc::testing::random_tensor;

namespace {

ad::Tensor random_orthogonal(std::size_t d, std::uint64_t seed) {
  const ad::Tensor g = random_tensor(d, d, seed, false);
  std::vector<std::vector<double>> q;
  for (std::size_t i = 0; i < d; ++i) {
    std::vector<double> v(d);
    for (std::size_t j = 0; j < d; ++j) v[j] = g(i, j);
    for (const auto& u : q) {
      double dot = 0.0;
      for (std::size_t j = 0; j < d; ++j) dot += v[j] * u[j];
      for (std::size_t j = 0; j < d; ++j) v[j] -= dot * u[j];
    }
    double norm = 0.0;
    for (double x : v) norm += x * x;
    for (double& x : v) x /= std::sqrt(norm);
    q.push_back(v);
  }
  std::vector<double> flat;
  for (const auto& row : q) flat.insert(flat.end(), row.begin(), row.end());
  return ad::Tensor(d, d, std::move(flat));
}

std::vector<double> checksum(const Model& model) {
  std::vector<double> out;
  for (const auto& p : model.parameters()) out.insert(out.end(), p.tensor.values().begin(), p.tensor.values().end());
  return out;
}

}  // namespace

TEST_CASE("InfoNCE of identical embeddings is ln b") {
  for (std::size_t b : {2u, 3u, 7u}) {
    const ad::Tensor e = ad::Tensor::full(b, 4, 0.3);
    CHECK(info_nce_loss(e, e, 0.05).loss.item() == doctest::Approx(std::log(static_cast<double>(b))).epsilon(1e-12));
  }
}

TEST_CASE("InfoNCE two-row hand example") {
  const ad::Tensor e(2, 2, {1, 0, -1, 0});
  const double want = std::log(1.0 + std::exp(-2.0));
  CHECK(info_nce_loss(e, e, 1.0).loss.item() == doctest::Approx(want).epsilon(1e-14));
  CHECK(want == doctest::Approx(0.1269).epsilon(1e-3));
}

TEST_CASE("InfoNCE gradient check at b = 4, d = 8") {
  ad::Tensor hr = random_tensor(4, 8, 1);
  ad::Tensor t = random_tensor(4, 8, 2);
  ad::Tensor log_inv = ad::Tensor::scalar(std::log(1.0 / 0.3), true);
  ad::Mask mask = ad::Mask::all(4, 4);
  mask.set(0, 3, false);
  for (const ad::Mask* m : {static_cast<const ad::Mask*>(nullptr), static_cast<const ad::Mask*>(&mask)}) {
    auto loss = [&] { return info_nce_loss(hr, t, inverse_temperature(log_inv), m).loss; };
    CHECK(ad::finite_diff_check(loss, hr) < 1e-4);
    CHECK(ad::finite_diff_check(loss, t) < 1e-4);
    CHECK(ad::finite_diff_check(loss, log_inv) < 1e-4);
  }
}

TEST_CASE("InfoNCE ignores positive row rescaling") {
  const ad::Tensor hr = random_tensor(5, 6, 3, false);
  const ad::Tensor t = random_tensor(5, 6, 4, false);
  const double base = info_nce_loss(hr, t, 0.1).loss.item();
  ad::Tensor scaled = random_tensor(5, 6, 3, false);
  for (std::size_t j = 0; j < 6; ++j) {
    scaled.mutable_values()[2 * 6 + j] *= 17.5;
    scaled.mutable_values()[4 * 6 + j] *= 0.003;
  }
  CHECK(std::abs(info_nce_loss(scaled, t, 0.1).loss.item() - base) < 1e-9);
}

TEST_CASE("InfoNCE is invariant to a joint rotation") {
  const ad::Tensor hr = random_tensor(4, 5, 5, false);
  const ad::Tensor t = random_tensor(4, 5, 6, false);
  const ad::Tensor q = random_orthogonal(5, 7);
  const double base = info_nce_loss(hr, t, 0.2).loss.item();
  const double rotated = info_nce_loss(ad::matmul(hr, q), ad::matmul(t, q), 0.2).loss.item();
  CHECK(std::abs(base - rotated) < 1e-9);
}

TEST_CASE("InfoNCE rejects a single-row batch and skips zero rows") {
  const ad::Tensor one = random_tensor(1, 3, 8, false);
  CHECK_THROWS_AS(info_nce_loss(one, one, 0.05), ContractError);
  CHECK_THROWS_AS(info_nce_loss(random_tensor(2, 3, 1, false), random_tensor(3, 3, 1, false), 0.05), DimensionError);
  ad::Tensor hr = random_tensor(3, 4, 9, false);
  for (std::size_t j = 0; j < 4; ++j) hr.mutable_values()[4 + j] = 0.0;
  const auto res = info_nce_loss(hr, random_tensor(3, 4, 10, false), 0.05);
  CHECK(res.skipped == std::vector<std::size_t>{1});
  CHECK(std::isfinite(res.loss.item()));
}

TEST_CASE("temperature is clamped") {
  CHECK(inverse_temperature(ad::Tensor::scalar(100.0)).item() == doctest::Approx(1.0 / kMinTemperature));
  CHECK(inverse_temperature(ad::Tensor::scalar(-5.0)).item() == doctest::Approx(1.0 / kMaxTemperature));
  CHECK(inverse_temperature(ad::Tensor::scalar(std::log(20.0))).item() == doctest::Approx(20.0));
}

TEST_CASE("combined loss examples") {
  CHECK(combined_loss(1.0, 0.5, 0.2) == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(combined_loss(1.3, 0.5, 1.0) == 1.3);
  CHECK(combined_loss(1.3, 0.5, 0.0) == 0.5);
  CHECK(combined_loss(ad::Tensor::scalar(1.0), ad::Tensor::scalar(0.5), 0.2).item() == doctest::Approx(0.6).epsilon(1e-15));
  CHECK_THROWS_AS(combined_loss(1.0, 0.5, 1.2), ConfigError);
  CHECK_THROWS_AS(combined_loss(1.0, 0.5, -0.1), ConfigError);
  CHECK_THROWS_AS(combined_loss(1.0, 0.5, NAN), ConfigError);
}

TEST_CASE("ranks [1, 2, 4] give the expected metrics") {
  const std::size_t ranks[] = {1, 2, 4};
  const auto m = metrics_from_ranks(ranks);
  CHECK(m.mrr == doctest::Approx(1.75 / 3.0).epsilon(1e-15));
  CHECK(m.mrr == doctest::Approx(0.5833).epsilon(1e-4));
  CHECK(m.hits1 == doctest::Approx(1.0 / 3.0));
  CHECK(m.hits3 == doctest::Approx(2.0 / 3.0));
  CHECK(m.hits10 == 1.0);
  const std::size_t ones[] = {1, 1, 1};
  const auto p = metrics_from_ranks(ones);
  CHECK(p.mrr == 1.0);
  CHECK(p.hits1 == 1.0);
  CHECK(p.average() == 1.0);
}

TEST_CASE("filtered rank on a five-entity toy") {
  // gold = entity 0 at 0.9; entity 1 scores 0.95 but is another known tail.
  const double scores[] = {0.9, 0.95, 0.8, 0.7, 0.1};
  const kg::EntityId filtered[] = {1};
  CHECK(rank_tail(scores, 0, filtered) == 1);
  CHECK(rank_tail(scores, 0, {}) == 2);
  // Brute-force oracle over every gold choice and filter subset.
  for (kg::EntityId gold = 0; gold < 5; ++gold) {
    for (unsigned subset = 0; subset < 32; ++subset) {
      std::vector<kg::EntityId> f;
      for (kg::EntityId j = 0; j < 5; ++j)
        if ((subset >> j & 1u) && j != gold) f.push_back(j);
      std::size_t want = 1;
      for (kg::EntityId j = 0; j < 5; ++j)
        if (j != gold && !(subset >> j & 1u) && scores[j] >= scores[gold]) ++want;
      CHECK(rank_tail(scores, gold, f) == want);
    }
  }
}

TEST_CASE("ties are pessimistic and NaN scores rank last") {
  const std::vector<double> flat(9, 0.4);
  CHECK(rank_tail(flat, 3, {}) == 9);
  const double nan_gold[] = {0.1, NAN, 0.2};
  CHECK(rank_tail(nan_gold, 1, {}) == 3);
  CHECK(rank_tail(nan_gold, 7, {}) == 3);
}

TEST_CASE("synthetic generator shape and determinism") {
  const SyntheticOptions o;
  const auto a = generate_synthetic(o);
  const auto b = generate_synthetic(o);
  CHECK(a.entities.size() == 50);
  CHECK(a.relations.size() == 5);
  CHECK(a.train.size() == 300);
  CHECK(a.valid.size() == 25);
  CHECK(a.test.size() == 25);
  CHECK(a.train == b.train);
  const kg::KnowledgeGraph kg = to_knowledge_graph(a);
  CHECK(kg.unseen_entities().empty());
  std::set<kg::Triple> all;
  for (kg::Split s : {kg::Split::train, kg::Split::valid, kg::Split::test})
    for (const auto& t : kg.triples(s)) all.insert(t);
  CHECK(all.size() == 350);
  // Heads' descriptions mention their tails' names.
  const auto tok = text::build_vocab(kg);
  for (const auto& t : kg.triples(kg::Split::train)) {
    const auto desc = tok.encode(kg.entity(t.head).description);
    const auto name = tok.encode(kg.entity(t.tail).name);
    bool shared = false;
    for (auto id : name) shared |= std::find(desc.begin(), desc.end(), id) != desc.end();
    CHECK(shared);
  }
}

TEST_CASE("evaluation matches a brute-force evaluator on an 8-triple graph") {
  SyntheticOptions o;
  o.entities = 12;
  o.relations = 2;
  o.train = 8;
  o.valid = 3;
  o.test = 3;
  o.seed = 5;
  const kg::KnowledgeGraph kg = testing::synthetic_graph(o);
  REQUIRE(kg.triples(kg::Split::train).size() == 8);
  RunConfig c = testing::small_config();
  Trainer trainer(c, kg, text::build_vocab(kg));
  trainer.train_epoch(1);
  for (kg::Split split : {kg::Split::train, kg::Split::valid, kg::Split::test}) {
    CAPTURE(kg::split_name(split));
    EvalOptions opts;
    opts.neighborhood_seed = 42;
    opts.batch_size = 5;
    const auto got = evaluate(trainer.model(), kg, split, opts);
    const auto want = testing::brute_force_evaluate(trainer.model(), kg, split, 42);
    CHECK(got.ranks == want.ranks);
    CHECK(got.all.mrr == want.metrics.mrr);
    CHECK(got.all.hits1 == want.metrics.hits1);
    CHECK(got.all.hits3 == want.metrics.hits3);
    CHECK(got.all.hits10 == want.metrics.hits10);
    CHECK(got.all.queries == 2 * kg.triples(split).size());
    CHECK(got.forward.queries + got.inverse.queries == got.all.queries);
  }
}

TEST_CASE("metric ordering, filtered versus raw rank, and read-only evaluation") {
  const kg::KnowledgeGraph kg = testing::synthetic_graph(testing::small_synthetic());
  Trainer trainer(testing::small_config(), kg, text::build_vocab(kg));
  trainer.train_epoch(1);
  const auto before = checksum(trainer.model());
  const auto report = evaluate(trainer.model(), kg, kg::Split::test);
  CHECK(checksum(trainer.model()) == before);
  for (const auto* m : {&report.all, &report.forward, &report.inverse}) {
    CHECK(m->hits1 <= m->hits3);
    CHECK(m->hits3 <= m->hits10);
    CHECK(m->hits10 <= 1.0);
    CHECK(m->mrr >= m->hits1);
    CHECK(m->mrr > 0.0);
    CHECK(m->mrr <= 1.0);
  }
  const ad::Tensor tails = trainer.model().all_tail_embeddings();
  for (const auto& t : kg.triples(kg::Split::test)) {
    const Query q{t.head, t.relation, t.tail, false};
    const auto scored = score_query(trainer.model(), kg, q, 0, tails);
    const auto filtered = rank_tail(scored.scores, t.tail, kg.true_tails(t.head, t.relation));
    const auto raw = rank_tail(scored.scores, t.tail, {});
    CHECK(filtered <= raw);
  }
}

TEST_CASE("training is deterministic for a fixed seed") {
  const kg::KnowledgeGraph kg = testing::synthetic_graph(testing::small_synthetic());
  RunConfig c = testing::small_config(9);
  c.eval_every = 1;
  Trainer a(c, kg, text::build_vocab(kg));
  Trainer b(c, kg, text::build_vocab(kg));
  const auto ra = a.run();
  const auto rb = b.run();
  CHECK(ra.log_lines == rb.log_lines);
  CHECK(checksum(a.model()) == checksum(b.model()));
  CHECK(ra.log_lines.size() == 2);
  CHECK(ra.log_lines[0].starts_with("epoch=1 train_loss="));
  CHECK(ra.log_lines[0].find("valid_mrr=") != std::string::npos);

  RunConfig other = c;
  other.seed = 10;
  Trainer d(other, kg, text::build_vocab(kg));
  CHECK(d.run().log_lines != ra.log_lines);
}

TEST_CASE("training lowers the loss on the small synthetic graph") {
  const kg::KnowledgeGraph kg = testing::synthetic_graph(testing::small_synthetic());
  RunConfig c = testing::small_config(2);
  c.epochs = 15;
  Trainer t(c, kg, text::build_vocab(kg));
  const auto out = t.run();
  CHECK(out.epochs.back().train_loss < out.epochs.front().train_loss);
  CHECK(out.epochs.back().kg_loss < out.epochs.front().kg_loss);
}

TEST_CASE("lambda = 1 leaves VGAE parameters without gradient") {
  const kg::KnowledgeGraph kg = testing::synthetic_graph(testing::small_synthetic());
  RunConfig c = testing::small_config();
  c.lambda = 1.0;
  Trainer t(c, kg, text::build_vocab(kg));
  const auto queries = training_queries(kg);
  const std::span<const Query> batch(queries.data(), 12);
  auto loss = t.batch_loss(batch, 1, 0);
  CHECK(loss.edge.item() > 0.0);
  CHECK(loss.total.item() == loss.kg.item());
  loss.total.backward();
  REQUIRE(t.model().vgae().has_value());
  for (const auto& p : t.model().vgae()->parameters())
    for (double g : p.tensor.grad()) CHECK(g == 0.0);

  RunConfig mixed = testing::small_config();
  Trainer m(mixed, kg, text::build_vocab(kg));
  auto l2 = m.batch_loss(batch, 1, 0);
  l2.total.backward();
  double norm = 0.0;
  for (const auto& p : m.model().vgae()->parameters())
    for (double g : p.tensor.grad()) norm += g * g;
  CHECK(norm > 0.0);
}

TEST_CASE("lambda = 1 matches a run with the VGAE disabled") {
  const kg::KnowledgeGraph kg = testing::synthetic_graph(testing::small_synthetic());
  RunConfig with = testing::small_config(4);
  with.lambda = 1.0;
  with.eval_every = 1;
  RunConfig without = with;
  without.vgae = false;
  Trainer a(with, kg, text::build_vocab(kg));
  Trainer b(without, kg, text::build_vocab(kg));
  const auto ra = a.run();
  const auto rb = b.run();
  // Edge loss is still reported for the λ = 1 run; everything else must agree.
  REQUIRE(ra.epochs.size() == rb.epochs.size());
  for (std::size_t e = 0; e < ra.epochs.size(); ++e) {
    CHECK(ra.epochs[e].train_loss == rb.epochs[e].train_loss);
    CHECK(ra.epochs[e].kg_loss == rb.epochs[e].kg_loss);
    CHECK(ra.epochs[e].valid_mrr == rb.epochs[e].valid_mrr);
  }
  std::map<std::string, std::vector<double>> pa, pb;
  for (const auto& p : a.model().parameters())
    if (!p.name.starts_with("vgae.")) pa[p.name].assign(p.tensor.values().begin(), p.tensor.values().end());
  for (const auto& p : b.model().parameters()) pb[p.name].assign(p.tensor.values().begin(), p.tensor.values().end());
  CHECK(pa == pb);
}

TEST_CASE("checkpoint round trip is bit exact") {
  const kg::KnowledgeGraph kg = testing::synthetic_graph(testing::small_synthetic());
  Trainer t(testing::small_config(), kg, text::build_vocab(kg));
  t.train_epoch(1);
  testing::TempDir dir("ckpt");
  const auto path = dir / "checkpoint.txt";
  save_checkpoint(path, t.model().config(), t.model().tokenizer(), t.model().parameters());
  const CheckpointData data = load_checkpoint(path);
  CHECK(data.tokenizer == t.model().tokenizer());
  CHECK(config_text(data.config) == config_text(t.model().config()));
  Model restored(data.config, data.tokenizer, kg);
  restored.load_state(data.tensors);
  CHECK(checksum(restored) == checksum(t.model()));
  save_checkpoint(dir / "again.txt", restored.config(), restored.tokenizer(), restored.parameters());
  CHECK(testing::read_file(path) == testing::read_file(dir / "again.txt"));
  const auto e1 = evaluate(t.model(), kg, kg::Split::valid);
  const auto e2 = evaluate(restored, kg, kg::Split::valid);
  CHECK(e1.ranks == e2.ranks);
}

TEST_CASE("checkpoint format errors") {
  const kg::KnowledgeGraph kg = testing::synthetic_graph(testing::small_synthetic());
  const Model model(testing::small_config(), text::build_vocab(kg), kg);
  std::ostringstream out;
  write_checkpoint(out, model.config(), model.tokenizer(), model.parameters());
  std::string text = out.str();
  REQUIRE(text.starts_with("nnkgc-checkpoint 1\n"));

  std::string future = text;
  future.replace(0, 18, "nnkgc-checkpoint 2");
  std::istringstream in_future(future);
  CHECK_THROWS_AS(read_checkpoint(in_future), CheckpointVersionError);

  std::istringstream garbage("hello world\n");
  CHECK_THROWS_AS(read_checkpoint(garbage), DatasetError);

  std::istringstream truncated(text.substr(0, text.size() / 2));
  CHECK_THROWS(read_checkpoint(truncated));

  CHECK_THROWS(load_checkpoint("/nonexistent/checkpoint.txt"));

  std::istringstream ok(text);
  CheckpointData data = read_checkpoint(ok);
  data.tensors.erase("text.embeddings");
  Model other(model.config(), model.tokenizer(), kg);
  CHECK_THROWS_AS(other.load_state(data.tensors), ContractError);
}

TEST_CASE("config registry, snapshots and validation") {
  RunConfig c;
  c.set("lambda", "0.5");
  c.set("encoder", "GraphSAGE");
  c.set("hops", "2");
  c.set("seed", "17");
  c.set("learn_tau", "false");
  CHECK(c.lambda == 0.5);
  CHECK(c.encoder == graph::Variant::sage);
  CHECK(c.get("hops") == "2");
  CHECK(c.get("learn_tau") == "false");
  CHECK(*c.seed == 17);
  CHECK_THROWS_AS(c.set("lamda", "0.5"), ConfigError);
  CHECK_THROWS_AS(c.set("hops", "two"), ConfigError);
  CHECK_THROWS_AS(c.set("learn_tau", "maybe"), ConfigError);
  const std::string msg = unknown_key_message("lamda");
  for (const auto& key : RunConfig::keys()) CHECK(msg.find(key) != std::string::npos);

  RunConfig back;
  apply_config_text(back, config_text(c), "snapshot");
  CHECK(back.entries() == c.entries());

  testing::TempDir dir("config");
  write_config_file(c, dir / "run.conf");
  CHECK(read_config_file(dir / "run.conf").entries() == c.entries());
  testing::write_file(dir / "bad.conf", "# comment\nlambda = 0.3\nbogus = 1\n");
  CHECK_THROWS_AS(read_config_file(dir / "bad.conf"), ConfigError);

  RunConfig v;
  CHECK_THROWS_AS(v.validate(), ConfigError);
  v.seed = 1;
  CHECK_NOTHROW(v.validate());
  v.lambda = 1.5;
  CHECK_THROWS_AS(v.validate(), ConfigError);
  v.lambda = 0.2;
  v.tau = 0.0;
  CHECK_THROWS_AS(v.validate(), ConfigError);
  v.tau = 0.05;
  v.dim = 50;
  CHECK_THROWS_AS(v.validate(), ConfigError);
}

TEST_CASE("divergence restores the last good parameters") {
  const kg::KnowledgeGraph kg = testing::synthetic_graph(testing::small_synthetic());
  RunConfig c = testing::small_config();
  c.lr = 1e200;
  c.epochs = 5;
  Trainer t(c, kg, text::build_vocab(kg));
  const auto initial = checksum(t.model());
  testing::TempDir dir("diverge");
  bool diverged = false;
  std::size_t completed = 0;
  std::vector<double> last_good = initial;
  try {
    t.run(dir.path(), [&](const EpochStats&) {
      ++completed;
      last_good = checksum(t.model());
    });
  } catch (const TrainingDiverged& e) {
    diverged = true;
    MESSAGE(std::string(e.what()));
  }
  REQUIRE(diverged);
  CHECK(checksum(t.model()) == last_good);
  for (double v : checksum(t.model())) CHECK(std::isfinite(v));
  CHECK(std::filesystem::exists(dir / "checkpoint.txt"));
  MESSAGE("epochs completed before divergence: " << completed);
}
