#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "nnkgc/autodiff/gradcheck.hpp"
#include "nnkgc/errors.hpp"
#include "nnkgc/graph/graph_encoder.hpp"
#include "test_util.hpp"

using namespace nnkgc;
using namespace nnkgc::graph;
using nnkgc::kg::DenseAdjacency;
using nnkgc::testing::max_abs_diff;
using nnkgc::testing::random_tensor;

namespace {

using Mat = std::vector<std::vector<double>>;

Mat to_mat(const ad::Tensor& t) {
  Mat m(t.rows(), std::vector<double>(t.cols()));
  for (std::size_t i = 0; i < t.rows(); ++i)
    for (std::size_t j = 0; j < t.cols(); ++j) m[i][j] = t(i, j);
  return m;
}

Mat mm(const Mat& a, const Mat& b) {
  Mat c(a.size(), std::vector<double>(b[0].size(), 0.0));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t k = 0; k < b.size(); ++k)
      for (std::size_t j = 0; j < b[0].size(); ++j) c[i][j] += a[i][k] * b[k][j];
  return c;
}

Mat relu(Mat a) {
  for (auto& row : a)
    for (double& v : row) v = std::max(v, 0.0);
  return a;
}

double max_diff(const Mat& a, const ad::Tensor& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[i].size(); ++j) m = std::max(m, std::abs(a[i][j] - b(i, j)));
  return m;
}

bool linked(const DenseAdjacency& a, std::size_t i, std::size_t j) { return a(i, j) || a(j, i); }

// Dense GCN propagation matrix computed entry by entry.
Mat gcn_oracle_a_hat(const DenseAdjacency& a) {
  const std::size_t n = a.size();
  std::vector<double> deg(n, 1.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j && linked(a, i, j)) deg[i] += 1.0;
  Mat m(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i == j || linked(a, i, j)) m[i][j] = 1.0 / std::sqrt(deg[i] * deg[j]);
  return m;
}

// One GAT head written as explicit loops over node pairs.
Mat gat_head_oracle(const Mat& x, const DenseAdjacency& a, const Mat& w, const Mat& a_src,
                    const Mat& a_dst, Mat* alpha_out = nullptr) {
  const std::size_t n = x.size();
  const Mat wx = mm(x, w);
  Mat alpha(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> e(n, -INFINITY);
    double best = -INFINITY;
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j && !linked(a, i, j)) continue;
      double s = 0.0;
      for (std::size_t k = 0; k < wx[0].size(); ++k) s += wx[i][k] * a_src[k][0] + wx[j][k] * a_dst[k][0];
      e[j] = s > 0 ? s : 0.2 * s;
      best = std::max(best, e[j]);
    }
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j)
      if (std::isfinite(e[j])) z += std::exp(e[j] - best);
    for (std::size_t j = 0; j < n; ++j)
      if (std::isfinite(e[j])) alpha[i][j] = std::exp(e[j] - best) / z;
  }
  if (alpha_out) *alpha_out = alpha;
  return mm(alpha, wx);
}

DenseAdjacency random_adjacency(std::size_t n, double p, std::uint64_t seed) {
  Rng rng(seed);
  std::bernoulli_distribution coin(p);
  DenseAdjacency a(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j && coin(rng)) a.set(i, j);
  return a;
}

GraphEncoderConfig config_for(Variant v, std::size_t dim, std::size_t layers = 2,
                              Activation act = Activation::relu) {
  GraphEncoderConfig c;
  c.variant = v;
  c.dim = dim;
  c.layers = layers;
  c.gat_heads = 3;
  c.activation = act;
  return c;
}

ad::Tensor param(const GraphEncoder& enc, const std::string& name) {
  for (const auto& p : enc.parameters())
    if (p.name == name) return p.tensor;
  throw std::runtime_error("no parameter " + name);
}

}  // namespace

TEST_CASE("normalized adjacency examples") {
  const auto one = normalize_adjacency(DenseAdjacency(1));
  CHECK(one.rows() == 1);
  CHECK(one(0, 0) == 1.0);

  DenseAdjacency two(2);
  two.set(0, 1);
  const auto a = normalize_adjacency(two);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 2; ++j) CHECK(a(i, j) == doctest::Approx(0.5).epsilon(1e-15));

  const DenseAdjacency r = random_adjacency(7, 0.3, 4).symmetrized();
  const auto s = normalize_adjacency(r);
  for (std::size_t i = 0; i < 7; ++i)
    for (std::size_t j = 0; j < 7; ++j) {
      CHECK(s(i, j) == s(j, i));
      CHECK(s(i, j) >= 0.0);
    }
  CHECK(max_diff(gcn_oracle_a_hat(r), s) < 1e-15);
}

TEST_CASE("directed adjacency is symmetrized before normalization") {
  const DenseAdjacency a = random_adjacency(6, 0.25, 8);
  CHECK(max_abs_diff(normalize_adjacency(a).values(), normalize_adjacency(a.symmetrized()).values()) == 0.0);
}

TEST_CASE("GCN two-node hand case") {
  DenseAdjacency a(2);
  a.set(0, 1);
  const ad::Tensor x(2, 2, {1, 0, 0, 1});
  const ad::Tensor w(2, 2, {1, 0, 0, 1});
  const auto y = gcn_layer(x, normalize_adjacency(a), w, Activation::none);
  for (double v : y.values()) CHECK(v == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("GCN with identity adjacency is a plain linear map") {
  const ad::Tensor x = random_tensor(4, 3, 1, false);
  const ad::Tensor w = random_tensor(3, 5, 2, false);
  const auto y = gcn_layer(x, normalize_adjacency(DenseAdjacency(4)), w, Activation::none);
  CHECK(max_abs_diff(y.values(), ad::matmul(x, w).values()) < 1e-15);
  CHECK_THROWS_AS(gcn_layer(x, normalize_adjacency(DenseAdjacency(3)), w, Activation::none), DimensionError);
}

TEST_CASE("GAT single node attends to itself") {
  const ad::Tensor x = random_tensor(1, 4, 3, false);
  const GatHead head{random_tensor(4, 4, 4, false), random_tensor(4, 1, 5, false), random_tensor(4, 1, 6, false)};
  const auto out = gat_layer(x, attention_mask(DenseAdjacency(1)), std::span(&head, 1), true, Activation::none);
  CHECK(out.attention[0](0, 0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(max_abs_diff(out.h.values(), ad::matmul(x, head.w).values()) < 1e-15);
}

TEST_CASE("GAT attention rows sum to one and respect the mask") {
  const DenseAdjacency a = random_adjacency(9, 0.2, 12);
  const ad::Tensor x = random_tensor(9, 6, 13, false);
  std::vector<GatHead> heads;
  for (int h = 0; h < 3; ++h)
    heads.push_back({random_tensor(6, 2, 20 + h, false), random_tensor(2, 1, 30 + h, false), random_tensor(2, 1, 40 + h, false)});
  const auto out = gat_layer(x, attention_mask(a), heads, false, Activation::relu);
  CHECK(out.h.cols() == 6);
  for (const auto& alpha : out.attention) {
    for (std::size_t i = 0; i < 9; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < 9; ++j) {
        s += alpha(i, j);
        if (i != j && !linked(a, i, j)) CHECK(alpha(i, j) == 0.0);
      }
      CHECK(std::abs(s - 1.0) < 1e-9);
    }
  }
}

TEST_CASE("GAT on a 3-node path matches a dense attention oracle") {
  DenseAdjacency a(3);
  a.set(0, 1);
  a.set(2, 1);
  const ad::Tensor x = random_tensor(3, 4, 50, false);
  std::vector<GatHead> heads;
  for (int h = 0; h < 2; ++h)
    heads.push_back({random_tensor(4, 3, 60 + h, false), random_tensor(3, 1, 70 + h, false), random_tensor(3, 1, 80 + h, false)});
  for (bool average : {false, true}) {
    const auto out = gat_layer(x, attention_mask(a), heads, average, Activation::none);
    std::vector<Mat> per_head;
    for (int h = 0; h < 2; ++h) {
      Mat alpha;
      per_head.push_back(gat_head_oracle(to_mat(x), a, to_mat(heads[h].w), to_mat(heads[h].a_src), to_mat(heads[h].a_dst), &alpha));
      CHECK(max_diff(alpha, out.attention[h]) < 1e-9);
    }
    Mat want(3);
    for (std::size_t i = 0; i < 3; ++i) {
      if (average) {
        for (std::size_t k = 0; k < 3; ++k) want[i].push_back((per_head[0][i][k] + per_head[1][i][k]) / 2.0);
      } else {
        for (int h = 0; h < 2; ++h) want[i].insert(want[i].end(), per_head[h][i].begin(), per_head[h][i].end());
      }
    }
    CHECK(max_diff(want, out.h) < 1e-9);
  }
}

TEST_CASE("SAGE hand cases") {
  // Isolated node: mean term is zero.
  const ad::Tensor x1(1, 2, {0.5, -1.0});
  const ad::Tensor w = random_tensor(4, 3, 90, false);
  const auto iso = sage_layer(x1, mean_aggregator(DenseAdjacency(1)), w, Activation::none);
  const ad::Tensor padded(1, 4, {0.5, -1.0, 0.0, 0.0});
  CHECK(max_abs_diff(iso.values(), ad::matmul(padded, w).values()) < 1e-15);

  // Neighbor with identical features: mean term equals x.
  DenseAdjacency two(2);
  two.set(1, 0);
  const ad::Tensor same(2, 2, {0.5, -1.0, 0.5, -1.0});
  const auto y = sage_layer(same, mean_aggregator(two), w, Activation::none);
  const ad::Tensor doubled(1, 4, {0.5, -1.0, 0.5, -1.0});
  const auto want = ad::matmul(doubled, w);
  for (std::size_t j = 0; j < 3; ++j) CHECK(y(0, j) == doctest::Approx(want(0, j)).epsilon(1e-14));

  // W = [I; I] block: h_i = x_i + mean of neighbors.
  DenseAdjacency tri(3);
  tri.set(0, 1);
  tri.set(0, 2);
  const ad::Tensor x(3, 2, {1, 2, 3, 4, 5, 6});
  const ad::Tensor block(4, 2, {1, 0, 0, 1, 1, 0, 0, 1});
  const auto h = sage_layer(x, mean_aggregator(tri), block, Activation::none);
  CHECK(h(0, 0) == doctest::Approx(1 + 4));
  CHECK(h(0, 1) == doctest::Approx(2 + 5));
  CHECK(h(1, 0) == doctest::Approx(3 + 1));
  CHECK(h(2, 1) == doctest::Approx(6 + 2));
}

TEST_CASE("two-layer GCN on a 5-node graph matches a dense reference") {
  DenseAdjacency a(5);
  a.set(0, 1);
  a.set(1, 2);
  a.set(3, 0);
  a.set(4, 3);
  a.set(2, 4);
  Rng rng(5);
  const GraphEncoder enc(config_for(Variant::gcn, 6), rng);
  const ad::Tensor x = random_tensor(5, 6, 100, false);
  const Mat a_hat = gcn_oracle_a_hat(a);
  const Mat h1 = relu(mm(mm(a_hat, to_mat(x)), to_mat(param(enc, "graph.gcn.layer0.w"))));
  const Mat h2 = mm(mm(a_hat, h1), to_mat(param(enc, "graph.gcn.layer1.w")));
  CHECK(max_diff(h2, enc.forward(a, x)) < 1e-9);
  const auto e = enc.encode(a, x).e_hr;
  for (std::size_t j = 0; j < 6; ++j) CHECK(std::abs(e(0, j) - (h2[0][j] + x(0, j))) < 1e-9);
}

TEST_CASE("two-layer GAT encoder matches per-head oracles") {
  const DenseAdjacency a = random_adjacency(5, 0.3, 21);
  Rng rng(6);
  const GraphEncoder enc(config_for(Variant::gat, 6, 2, Activation::none), rng);
  const ad::Tensor x = random_tensor(5, 6, 101, false);
  auto head = [&](int layer, int h, const Mat& input) {
    const std::string p = "graph.gat.layer" + std::to_string(layer) + ".head" + std::to_string(h);
    return gat_head_oracle(input, a, to_mat(param(enc, p + ".w")), to_mat(param(enc, p + ".a_src")), to_mat(param(enc, p + ".a_dst")));
  };
  Mat h1(5);
  for (int h = 0; h < 3; ++h) {
    const Mat part = head(0, h, to_mat(x));
    for (std::size_t i = 0; i < 5; ++i) h1[i].insert(h1[i].end(), part[i].begin(), part[i].end());
  }
  Mat h2(5, std::vector<double>(6, 0.0));
  for (int h = 0; h < 3; ++h) {
    const Mat part = head(1, h, h1);
    for (std::size_t i = 0; i < 5; ++i)
      for (std::size_t j = 0; j < 6; ++j) h2[i][j] += part[i][j] / 3.0;
  }
  CHECK(max_diff(h2, enc.forward(a, x)) < 1e-9);
  const auto res = enc.encode(a, x);
  double total = 0.0;
  for (double w : res.head_attention) total += w;
  CHECK(res.head_attention.size() == 5);
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("head-only neighborhood readout") {
  Rng rng(7);
  const GraphEncoder enc(config_for(Variant::gcn, 4), rng);
  const ad::Tensor x = random_tensor(1, 4, 102, false);
  const Mat lin = mm(relu(mm(to_mat(x), to_mat(param(enc, "graph.gcn.layer0.w")))), to_mat(param(enc, "graph.gcn.layer1.w")));
  const auto e = enc.encode(DenseAdjacency(1), x).e_hr;
  for (std::size_t j = 0; j < 4; ++j) CHECK(e(0, j) == doctest::Approx(lin[0][j] + x(0, j)).epsilon(1e-12));
}

TEST_CASE("e_hr is invariant to neighbor permutations for every variant") {
  for (Variant v : {Variant::gcn, Variant::gat, Variant::sage}) {
    CAPTURE(variant_name(v));
    Rng rng(8);
    const GraphEncoder enc(config_for(v, 6), rng);
    for (std::uint64_t trial = 0; trial < 10; ++trial) {
      const std::size_t n = 2 + trial % 6;
      const DenseAdjacency a = random_adjacency(n, 0.35, 200 + trial);
      const ad::Tensor x = random_tensor(n, 6, 300 + trial, false);
      std::vector<std::size_t> order(n);
      for (std::size_t i = 0; i < n; ++i) order[i] = i;
      Rng shuffle(trial);
      std::shuffle(order.begin() + 1, order.end(), shuffle);
      const ad::Tensor xp = ad::gather_rows(x, order);
      const auto e1 = enc.encode(a, x).e_hr;
      const auto e2 = enc.encode(a.permuted(order), xp).e_hr;
      CHECK(max_abs_diff(e1.values(), e2.values()) < 1e-9);
    }
  }
}

TEST_CASE("all variants produce the same output shapes") {
  const DenseAdjacency a = random_adjacency(4, 0.4, 9);
  const ad::Tensor x = random_tensor(4, 6, 103, false);
  for (Variant v : {Variant::gcn, Variant::gat, Variant::sage}) {
    Rng rng(9);
    const GraphEncoder enc(config_for(v, 6, 3), rng);
    const auto out = enc.forward(a, x);
    CHECK(out.rows() == 4);
    CHECK(out.cols() == 6);
    const auto e = enc.encode(a, x).e_hr;
    CHECK(e.rows() == 1);
    CHECK(e.cols() == 6);
  }
}

TEST_CASE("gradient checks through every variant") {
  for (Variant v : {Variant::gcn, Variant::gat, Variant::sage}) {
    for (Activation act : {Activation::relu, Activation::tanh}) {
      CAPTURE(variant_name(v));
      CAPTURE(activation_name(act));
      Rng rng(10);
      const GraphEncoder enc(config_for(v, 6, 2, act), rng);
      const DenseAdjacency a = random_adjacency(6, 0.3, 11);
      ad::Tensor x = random_tensor(6, 6, 104, true);
      const ad::Tensor weights = random_tensor(1, 6, 105, false);
      auto loss = [&] { return ad::sum(ad::hadamard(enc.encode(a, x).e_hr, weights)); };
      CHECK(ad::finite_diff_check(loss, x) < 1e-5);
      for (const auto& p : enc.parameters()) {
        CAPTURE(p.name);
        CHECK(ad::finite_diff_check(loss, p.tensor) < 1e-5);
      }
    }
  }
}

TEST_CASE("encoder argument checks") {
  Rng rng(12);
  const GraphEncoder enc(config_for(Variant::gcn, 4), rng);
  CHECK_THROWS_AS(enc.encode(DenseAdjacency(3), random_tensor(2, 4, 1, false)), DimensionError);
  CHECK_THROWS_AS(enc.encode(DenseAdjacency(2), random_tensor(2, 5, 1, false)), DimensionError);
  GraphEncoderConfig bad = config_for(Variant::gat, 8, 2);
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad.layers = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  CHECK(parse_variant("GraphSAGE") == Variant::sage);
  CHECK(parse_variant("GCN") == Variant::gcn);
  CHECK_THROWS_AS(parse_variant("rgcn"), ConfigError);
}

TEST_CASE("hidden widths can differ from the output width") {
  GraphEncoderConfig c = config_for(Variant::gat, 6, 3);
  c.hidden_dims = {9, 12};
  Rng rng(13);
  const GraphEncoder enc(c, rng);
  const auto out = enc.forward(random_adjacency(4, 0.4, 14), random_tensor(4, 6, 15, false));
  CHECK(out.cols() == 6);
}
