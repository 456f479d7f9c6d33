#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>

#include "doctest.h"
#include "egat/errors.hpp"
#include "egat/layers/deepset.hpp"
#include "egat/layers/gat.hpp"
#include "egat/layers/gcn.hpp"
#include "egat/layers/set_transformer.hpp"
#include "egat/numerics/grad_check.hpp"
#include "support.hpp"

using namespace egat;
using namespace egat::layers;
using numerics::Shape;

namespace {

using Mat = std::vector<std::vector<double>>;

Mat to_mat(const Tensor& t) {
  Mat m(t.rows(), std::vector<double>(t.cols()));
  for (std::size_t i = 0; i < t.rows(); ++i)
    for (std::size_t j = 0; j < t.cols(); ++j) m[i][j] = t.at(i, j);
  return m;
}

Mat mm(const Mat& a, const Mat& b) {
  Mat c(a.size(), std::vector<double>(b[0].size(), 0.0));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t k = 0; k < b.size(); ++k)
      for (std::size_t j = 0; j < b[0].size(); ++j) c[i][j] += a[i][k] * b[k][j];
  return c;
}

double elu_ref(double x) { return x > 0 ? x : std::expm1(x); }

Mat layer_norm_ref(const Mat& x, const Tensor& gain, const Tensor& bias) {
  Mat out = x;
  for (auto& row : out) {
    const double d = static_cast<double>(row.size());
    const double mean = std::accumulate(row.begin(), row.end(), 0.0) / d;
    double var = 0.0;
    for (double v : row) var += (v - mean) * (v - mean);
    const double inv = 1.0 / std::sqrt(var / d + 1e-5);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] = (row[c] - mean) * inv * gain[c] + bias[c];
  }
  return out;
}

std::map<std::string, Tensor*> by_name(const ParamList& params) {
  std::map<std::string, Tensor*> m;
  for (const auto& [name, t] : params) m[name] = t;
  return m;
}

void randomize(const ParamList& params, std::mt19937_64& rng, double scale = 0.8) {
  std::uniform_real_distribution<double> u(-scale, scale);
  for (const auto& [name, t] : params)
    for (double& v : t->values()) v = u(rng);
}

// Scalar probe sum(out * R) with a fixed random R, so no gradient is zero by symmetry.
Var probe(Tape& t, Var out, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Tensor r = test::random_tensor(t.value(out).shape(), rng);
  return numerics::sum_all(t, numerics::mul(t, out, t.constant(std::move(r))));
}

IndexPtr make_seg(std::vector<std::size_t> v) { return std::make_shared<const std::vector<std::size_t>>(std::move(v)); }

const numerics::GradCheckOptions kCheck{1e-6, 40, 3, 1e-5};

}  // namespace

TEST_CASE("GAT: a node with only a self-loop passes its own transformed features") {
  std::mt19937_64 rng(1);
  GatLayer layer(5, 3, 4, true, rng);
  auto g = graph::with_self_loops(graph::SparseGraph::from_edges(3, {{0, 1, 1.0}, {1, 0, 1.0}}));
  const Tensor x = test::random_tensor({3, 5}, rng);
  Tape t;
  const GatOutput out = layer.forward(t, t.constant(x), EdgeIndex::of(g));
  const Tensor& h = t.value(out.h);
  REQUIRE(h.cols() == 12);
  const Mat wh = mm(to_mat(x), to_mat(layer.weight()));
  for (std::size_t c = 0; c < 12; ++c) CHECK(h.at(2, c) == doctest::Approx(elu_ref(wh[2][c])).epsilon(1e-14));
  // node 2's single edge has coefficient exactly 1 in every head
  const Tensor& alpha = t.value(out.alpha);
  const std::size_t e2 = g.row_ptr[2];
  for (std::size_t k = 0; k < 4; ++k) CHECK(alpha.at(e2, k) == 1.0);
}

TEST_CASE("GAT: coefficients form a distribution over every neighbourhood") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(seed);
    const auto g = test::random_graph(60, 0.1, rng);
    GatLayer layer(7, 8, 8, true, rng);
    Tape t;
    const auto out = layer.forward(t, t.constant(test::random_tensor({60, 7}, rng, -3, 3)), EdgeIndex::of(g));
    const Tensor& a = t.value(out.alpha);
    for (std::size_t i = 0; i < g.n_nodes; ++i)
      for (std::size_t k = 0; k < 8; ++k) {
        double s = 0.0;
        for (std::size_t e = g.row_ptr[i]; e < g.row_ptr[i + 1]; ++e) {
          CHECK(a.at(e, k) >= 0.0);
          s += a.at(e, k);
        }
        CHECK(std::abs(s - 1.0) < 1e-9);
      }
    CHECK(t.value(out.h).cols() == 64);
  }
}

TEST_CASE("GAT: zero attention vectors reduce to the neighbourhood mean") {
  std::mt19937_64 rng(4);
  const auto g = test::random_graph(25, 0.2, rng);
  GatLayer layer(6, 4, 3, false, rng);
  std::fill(layer.att_self().values().begin(), layer.att_self().values().end(), 0.0);
  std::fill(layer.att_neigh().values().begin(), layer.att_neigh().values().end(), 0.0);
  const Tensor x = test::random_tensor({25, 6}, rng);
  Tape t;
  const Tensor& h = t.value(layer.forward(t, t.constant(x), EdgeIndex::of(g)).h);
  REQUIRE(h.cols() == 4);
  const Mat wh = mm(to_mat(x), to_mat(layer.weight()));
  for (std::size_t i = 0; i < 25; ++i) {
    const double deg = static_cast<double>(g.degree(i));
    for (std::size_t c = 0; c < 4; ++c) {
      double expect = 0.0;
      for (std::size_t k = 0; k < 3; ++k)
        for (std::size_t e = g.row_ptr[i]; e < g.row_ptr[i + 1]; ++e) expect += wh[g.col_idx[e]][k * 4 + c] / deg;
      CHECK(h.at(i, c) == doctest::Approx(expect / 3.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("GAT: logits follow the leaky attention formula") {
  std::mt19937_64 rng(9);
  const auto g = test::random_graph(12, 0.4, rng);
  GatLayer layer(4, 2, 2, true, rng);
  const Tensor x = test::random_tensor({12, 4}, rng);
  Tape t;
  const Tensor& alpha = t.value(layer.forward(t, t.constant(x), EdgeIndex::of(g)).alpha);
  const Mat wh = mm(to_mat(x), to_mat(layer.weight()));
  for (std::size_t i = 0; i < 12; ++i)
    for (std::size_t k = 0; k < 2; ++k) {
      std::vector<double> e;
      for (std::size_t q = g.row_ptr[i]; q < g.row_ptr[i + 1]; ++q) {
        const std::size_t j = g.col_idx[q];
        double s = 0.0;
        for (std::size_t c = 0; c < 2; ++c)
          s += layer.att_self().at(k, c) * wh[i][k * 2 + c] + layer.att_neigh().at(k, c) * wh[j][k * 2 + c];
        e.push_back(s > 0 ? s : 0.2 * s);
      }
      double z = 0.0;
      for (double v : e) z += std::exp(v);
      for (std::size_t q = 0; q < e.size(); ++q)
        CHECK(alpha.at(g.row_ptr[i] + q, k) == doctest::Approx(std::exp(e[q]) / z).epsilon(1e-12));
    }
}

TEST_CASE("GAT: gradients match finite differences") {
  for (bool concat : {true, false}) {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      std::mt19937_64 rng(seed + 100);
      const auto g = test::random_graph(15, 0.25, rng);
      const EdgeIndex edges = EdgeIndex::of(g);
      GatLayer layer(5, 3, 2, concat, rng);
      Tensor x = test::random_param({15, 5}, rng);
      Tensor mask = test::random_param({g.n_edges()}, rng);
      ParamList params;
      layer.collect("gat", params);
      auto ptrs = tensors_of(params);
      ptrs.push_back(&x);
      ptrs.push_back(&mask);
      auto loss = [&](Tape& t) {
        numerics::Rng drop(seed);
        GatOptions opt{true, 0.3, &drop, t.parameter(mask)};
        return probe(t, layer.forward(t, t.parameter(x), edges, opt).h, seed);
      };
      const auto report = numerics::grad_check(loss, ptrs, kCheck);
      CHECK(report.max_rel_error < 1e-4);
    }
  }
}

TEST_CASE("GAT: errors and attention extraction") {
  std::mt19937_64 rng(2);
  CHECK_THROWS_AS(GatLayer(0, 2, 2, true, rng), ConfigError);
  const auto bare = graph::SparseGraph::from_edges(3, {{0, 1, 1.0}, {1, 0, 1.0}});
  CHECK_THROWS_AS(EdgeIndex::of(bare), DataError);

  // path 0-1-2 with self-loops: node 0 has one neighbour plus itself
  const auto g = graph::with_self_loops(graph::symmetrize(graph::SparseGraph::from_edges(3, {{0, 1, 0.5}, {1, 2, 0.7}})));
  GatLayer layer(4, 8, 8, true, rng);
  const Tensor x = test::random_tensor({3, 4}, rng);
  const Tensor a = extract_attention(layer, x, g);
  REQUIRE(a.rows() == g.n_edges());
  REQUIRE(a.cols() == 8);
  for (double v : a.values()) CHECK((v >= 0.0 && v <= 1.0));
  for (std::size_t k = 0; k < 8; ++k) CHECK(a.at(0, k) + a.at(1, k) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(extract_attention(layer, test::random_tensor({3, 5}, rng), g), ConfigError);
  // extraction is repeatable bit for bit
  CHECK(extract_attention(layer, x, g) == a);
}

TEST_CASE("multihead attention: singleton sets and identical queries") {
  std::mt19937_64 rng(5);
  MultiheadAttention mh(6, 2, rng);
  ParamList params;
  mh.collect("mh", params);
  auto p = by_name(params);

  const Tensor v = test::random_tensor({1, 6}, rng);
  const Tensor q = test::random_tensor({1, 6}, rng);
  Tape t;
  const Tensor& out = t.value(mh.forward(t, t.constant(q), t.constant(q), t.constant(v), make_seg({0, 1})));
  const Mat expect = mm(mm(to_mat(v), to_mat(*p["mh.wv"])), to_mat(*p["mh.wo"]));
  for (std::size_t c = 0; c < 6; ++c) CHECK(out.at(0, c) == doctest::Approx(expect[0][c]).epsilon(1e-13));

  Tensor qs = Tensor::matrix(4, 6);
  const Tensor row = test::random_tensor({1, 6}, rng);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t c = 0; c < 6; ++c) qs.at(i, c) = row[c];
  const Tensor kv = test::random_tensor({4, 6}, rng);
  Tape t2;
  const Tensor& o2 = t2.value(mh.forward(t2, t2.constant(qs), t2.constant(kv), t2.constant(kv), make_seg({0, 4})));
  for (std::size_t i = 1; i < 4; ++i)
    for (std::size_t c = 0; c < 6; ++c) CHECK(o2.at(i, c) == o2.at(0, c));

  CHECK_THROWS_AS(MultiheadAttention(7, 2, rng), ConfigError);
}

TEST_CASE("multihead attention: gradients match finite differences") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    std::mt19937_64 rng(seed + 7);
    MultiheadAttention mh(6, 3, rng);
    ParamList params;
    mh.collect("mh", params);
    Tensor q = test::random_param({7, 6}, rng), k = test::random_param({7, 6}, rng), v = test::random_param({7, 6}, rng);
    auto ptrs = tensors_of(params);
    for (Tensor* x : {&q, &k, &v}) ptrs.push_back(x);
    const auto seg = make_seg({0, 3, 4, 7});
    auto loss = [&](Tape& t) {
      return probe(t, mh.forward(t, t.parameter(q), t.parameter(k), t.parameter(v), seg), seed);
    };
    CHECK(numerics::grad_check(loss, ptrs, kCheck).max_rel_error < 1e-4);
  }
}

TEST_CASE("set transformer block: matches a direct evaluation of the two residual sublayers") {
  std::mt19937_64 rng(11);
  SetTransformerBlock stb(6, 4, 2, rng);
  ParamList params;
  stb.collect("stb", params);
  randomize(params, rng);
  auto p = by_name(params);
  const Tensor s = test::random_tensor({5, 6}, rng);
  Tape t;
  const Tensor& out = t.value(stb.forward(t, t.constant(s), make_seg({0, 5})));
  REQUIRE(out.rows() == 5);
  REQUIRE(out.cols() == 4);

  const Mat S = to_mat(s);
  const Mat q = mm(S, to_mat(*p["stb.attn.wq"])), k = mm(S, to_mat(*p["stb.attn.wk"])),
            v = mm(S, to_mat(*p["stb.attn.wv"]));
  Mat o(5, std::vector<double>(6, 0.0));
  for (std::size_t h = 0; h < 2; ++h)
    for (std::size_t i = 0; i < 5; ++i) {
      std::vector<double> sc(5);
      for (std::size_t j = 0; j < 5; ++j) {
        double d = 0.0;
        for (std::size_t c = h * 3; c < h * 3 + 3; ++c) d += q[i][c] * k[j][c];
        sc[j] = d / std::sqrt(3.0);
      }
      const double mx = *std::max_element(sc.begin(), sc.end());
      double z = 0.0;
      for (double& x : sc) z += (x = std::exp(x - mx));
      for (std::size_t j = 0; j < 5; ++j)
        for (std::size_t c = h * 3; c < h * 3 + 3; ++c) o[i][c] += sc[j] / z * v[j][c];
    }
  Mat x = mm(o, to_mat(*p["stb.attn.wo"]));
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t c = 0; c < 6; ++c) x[i][c] += S[i][c];
  x = layer_norm_ref(x, *p["stb.ln1.gain"], *p["stb.ln1.bias"]);
  Mat hid = mm(x, to_mat(*p["stb.ff1.weight"]));
  for (auto& r : hid)
    for (std::size_t c = 0; c < r.size(); ++c) r[c] = std::max(0.0, r[c] + (*p["stb.ff1.bias"])[c]);
  Mat y = mm(hid, to_mat(*p["stb.ff2.weight"]));
  const Mat skip = mm(x, to_mat(*p["stb.proj"]));
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t c = 0; c < 4; ++c) y[i][c] += (*p["stb.ff2.bias"])[c] + skip[i][c];
  y = layer_norm_ref(y, *p["stb.ln2.gain"], *p["stb.ln2.bias"]);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t c = 0; c < 4; ++c) CHECK(out.at(i, c) == doctest::Approx(y[i][c]).epsilon(1e-10));
  CHECK(p.count("stb.ff1.weight") == 1);
  CHECK((*p["stb.ff1.weight"]).cols() == 12);
}

TEST_CASE("set transformer block: permutation equivariance") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(seed);
    SetTransformerBlock stb(18, 8, 2, rng);
    const std::size_t n = 2 + seed * 3;
    const Tensor s = test::random_tensor({n, 18}, rng);
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Tensor sp = Tensor::matrix(n, 18);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t c = 0; c < 18; ++c) sp.at(i, c) = s.at(perm[i], c);
    Tape t;
    const Tensor a = t.value(stb.forward(t, t.constant(s), make_seg({0, n})));
    const Tensor b = t.value(stb.forward(t, t.constant(sp), make_seg({0, n})));
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t c = 0; c < 8; ++c) worst = std::max(worst, std::abs(b.at(i, c) - a.at(perm[i], c)));
    CHECK(worst < 1e-12);
  }
}

TEST_CASE("set transformer block: gradients match finite differences") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    std::mt19937_64 rng(seed + 40);
    SetTransformerBlock stb(6, 4, 2, rng);
    ParamList params;
    stb.collect("stb", params);
    randomize(params, rng);
    Tensor s = test::random_param({6, 6}, rng);
    auto ptrs = tensors_of(params);
    ptrs.push_back(&s);
    const auto seg = make_seg({0, 1, 4, 6});
    auto loss = [&](Tape& t) { return probe(t, stb.forward(t, t.parameter(s), seg), seed); };
    CHECK(numerics::grad_check(loss, ptrs, kCheck).max_rel_error < 1e-4);
  }
}

TEST_CASE("set aggregation: worked cases") {
  std::mt19937_64 rng(21);
  SetTransformerBlock stb(18, 8, 2, rng);
  SetAggregator agg(10);
  CHECK(agg.lambda()[0] == 0.1);

  // n = 1: lambda_1 times the single encoded row
  const Tensor one = test::random_tensor({1, 18}, rng);
  const std::vector<double> k1{0.0};
  const std::vector<std::size_t> id1{3};
  agg.lambda()[0] = 0.37;
  Tape t;
  const Tensor w1 = t.value(set_encode_aggregate(t, stb, agg, t.constant(one), k1, id1));
  const Tensor enc = t.value(stb.forward(t, t.constant(one), make_seg({0, 1})));
  for (std::size_t c = 0; c < 8; ++c) CHECK(w1[c] == doctest::Approx(0.37 * enc[c]).epsilon(1e-15));

  // one-hot lambda picks the element at that canonical position
  const Tensor s = test::random_tensor({4, 18}, rng);
  const std::vector<double> keys{0.9, 0.0, 0.4, 0.4};
  const std::vector<std::size_t> ids{7, 2, 9, 5};
  const std::vector<std::size_t> canon{1, 3, 2, 0};  // by key, ties by id
  CHECK(canonical_order(std::vector<std::size_t>{0, 4}, keys, ids) == canon);
  Tensor sorted = Tensor::matrix(4, 18);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t c = 0; c < 18; ++c) sorted.at(i, c) = s.at(canon[i], c);
  const Tensor enc4 = t.value(stb.forward(t, t.constant(sorted), make_seg({0, 4})));
  for (std::size_t j = 0; j < 4; ++j) {
    std::fill(agg.lambda().values().begin(), agg.lambda().values().end(), 0.0);
    agg.lambda()[j] = 1.0;
    const Tensor w = t.value(set_encode_aggregate(t, stb, agg, t.constant(s), keys, ids));
    for (std::size_t c = 0; c < 8; ++c) CHECK(w[c] == enc4.at(j, c));
  }

  // averaged mode over identical elements gives the common encoded row
  SetAggregator avg(10, true);
  Tensor same = Tensor::matrix(5, 18);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t c = 0; c < 18; ++c) same.at(i, c) = one[c];
  const std::vector<double> k5{0.1, 0.2, 0.3, 0.4, 0.5};
  const std::vector<std::size_t> id5{0, 1, 2, 3, 4};
  const Tensor wa = t.value(set_encode_aggregate(t, stb, avg, t.constant(same), k5, id5));
  for (std::size_t c = 0; c < 8; ++c) CHECK(wa[c] == doctest::Approx(enc[c]).epsilon(1e-12));

  SetAggregator small(3);
  CHECK_THROWS_AS(set_encode_aggregate(t, stb, small, t.constant(same), k5, id5), ConfigError);
}

TEST_CASE("set aggregation: permuting a keyed set leaves the output bit-identical") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    SetTransformerBlock stb(18, 8, 2, rng);
    for (bool averaged : {false, true}) {
      SetAggregator agg(40, averaged);
      randomize({{"lambda", &agg.lambda()}}, rng);
      const std::size_t n = 1 + seed % 13;
      const Tensor s = test::random_tensor({n, 18}, rng);
      std::vector<double> keys(n);
      std::vector<std::size_t> ids(n);
      for (std::size_t i = 0; i < n; ++i) {
        keys[i] = static_cast<double>(rng() % 4);  // plenty of ties
        ids[i] = i * 3 + 1;
      }
      std::vector<std::size_t> perm(n);
      std::iota(perm.begin(), perm.end(), 0);
      std::shuffle(perm.begin(), perm.end(), rng);
      Tensor sp = Tensor::matrix(n, 18);
      std::vector<double> kp(n);
      std::vector<std::size_t> ip(n);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < 18; ++c) sp.at(i, c) = s.at(perm[i], c);
        kp[i] = keys[perm[i]];
        ip[i] = ids[perm[i]];
      }
      Tape t;
      const Tensor a = t.value(set_encode_aggregate(t, stb, agg, t.constant(s), keys, ids));
      const Tensor b = t.value(set_encode_aggregate(t, stb, agg, t.constant(sp), kp, ip));
      CHECK(a == b);
    }
  }
}

TEST_CASE("set aggregation: gradients reach lambda, and a frozen lambda receives none") {
  std::mt19937_64 rng(3);
  SetTransformerBlock stb(6, 4, 2, rng);
  SetAggregator agg(5);
  randomize({{"lambda", &agg.lambda()}}, rng);
  Tensor s = test::random_param({7, 6}, rng);
  const auto seg = make_seg({0, 2, 7});
  ParamList params;
  stb.collect("stb", params);
  agg.collect("agg", params);
  auto loss = [&](Tape& t) { return probe(t, agg.forward(t, stb.forward(t, t.parameter(s), seg), seg), 1); };
  auto ptrs = tensors_of(params);
  ptrs.push_back(&s);
  CHECK(numerics::grad_check(loss, ptrs, kCheck).max_rel_error < 1e-4);

  agg.set_frozen(true);
  agg.lambda().zero_grad();
  Tape t;
  t.backward(loss(t));
  for (double g : agg.lambda().grad()) CHECK(g == 0.0);
}

TEST_CASE("DeepSet: exact invariance, singleton and duplication") {
  std::mt19937_64 rng(8);
  DeepSet ds(18, 16, 8, rng);
  for (std::uint64_t rep = 0; rep < 10; ++rep) {
    const std::size_t n = 1 + rep * 2;
    const Tensor s = test::random_tensor({n, 18}, rng);
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Tensor sp = Tensor::matrix(n, 18);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t c = 0; c < 18; ++c) sp.at(i, c) = s.at(perm[i], c);
    Tape t;
    CHECK(t.value(ds.forward(t, t.constant(s), make_seg({0, n}))) ==
          t.value(ds.forward(t, t.constant(sp), make_seg({0, n}))));
  }

  ParamList params;
  ds.collect("ds", params);
  auto p = by_name(params);
  const Tensor x = test::random_tensor({1, 18}, rng);
  Mat h = mm(to_mat(x), to_mat(*p["ds.phi1.weight"]));
  for (std::size_t c = 0; c < 16; ++c) h[0][c] = std::max(0.0, h[0][c] + (*p["ds.phi1.bias"])[c]);
  Mat e = mm(h, to_mat(*p["ds.phi2.weight"]));
  for (std::size_t c = 0; c < 8; ++c) e[0][c] += (*p["ds.phi2.bias"])[c];
  Mat r = mm(e, to_mat(*p["ds.rho.weight"]));
  Tape t;
  const Tensor out = t.value(ds.forward(t, t.constant(x), make_seg({0, 1})));
  for (std::size_t c = 0; c < 8; ++c)
    CHECK(out[c] == doctest::Approx(elu_ref(r[0][c] + (*p["ds.rho.bias"])[c])).epsilon(1e-12));

  Tensor twice = Tensor::matrix(2, 18);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t c = 0; c < 18; ++c) twice.at(i, c) = x[c];
  const Tensor p1 = t.value(ds.pooled(t, t.constant(x), make_seg({0, 1})));
  const Tensor p2 = t.value(ds.pooled(t, t.constant(twice), make_seg({0, 2})));
  for (std::size_t c = 0; c < 8; ++c) CHECK(p2[c] == 2.0 * p1[c]);
}

TEST_CASE("DeepSet: gradients match finite differences") {
  std::mt19937_64 rng(12);
  DeepSet ds(5, 6, 3, rng);
  ParamList params;
  ds.collect("ds", params);
  Tensor s = test::random_param({9, 5}, rng);
  auto ptrs = tensors_of(params);
  ptrs.push_back(&s);
  const auto seg = make_seg({0, 4, 5, 9});
  auto loss = [&](Tape& t) { return probe(t, ds.forward(t, t.parameter(s), seg), 2); };
  CHECK(numerics::grad_check(loss, ptrs, kCheck).max_rel_error < 1e-4);
}

TEST_CASE("GCN: normalized propagation") {
  std::mt19937_64 rng(13);
  const auto g = test::random_graph(20, 0.2, rng);
  const EdgeIndex edges = EdgeIndex::of(g);
  GcnLayer layer(4, 3, true, rng);
  const Tensor x = test::random_tensor({20, 4}, rng);
  Tape t;
  const Tensor h = t.value(layer.forward(t, t.constant(x), edges, gcn_coefficients(edges)));
  // dense D^-1/2 A D^-1/2 with A binary, self-loops included
  Mat a(20, std::vector<double>(20, 0.0));
  std::vector<double> deg(20, 0.0);
  for (std::size_t i = 0; i < 20; ++i)
    for (std::size_t e = g.row_ptr[i]; e < g.row_ptr[i + 1]; ++e) {
      a[i][g.col_idx[e]] = 1.0;
      deg[i] += 1.0;
    }
  for (std::size_t i = 0; i < 20; ++i)
    for (std::size_t j = 0; j < 20; ++j) a[i][j] /= std::sqrt(deg[i] * deg[j]);
  const Mat ref = mm(mm(a, to_mat(x)), to_mat(layer.weight()));
  for (std::size_t i = 0; i < 20; ++i)
    for (std::size_t c = 0; c < 3; ++c) CHECK(h.at(i, c) == doctest::Approx(elu_ref(ref[i][c])).epsilon(1e-12));

  // isolated node with a self-loop, and a symmetric pair with equal features
  const auto small = graph::with_self_loops(graph::symmetrize(graph::SparseGraph::from_edges(3, {{0, 1, 1.0}})));
  const EdgeIndex se = EdgeIndex::of(small);
  Tensor xs = test::random_tensor({3, 4}, rng);
  for (std::size_t c = 0; c < 4; ++c) xs.at(1, c) = xs.at(0, c);
  const Tensor hs = t.value(layer.forward(t, t.constant(xs), se, gcn_coefficients(se)));
  const Mat xw = mm(to_mat(xs), to_mat(layer.weight()));
  for (std::size_t c = 0; c < 3; ++c) {
    CHECK(hs.at(0, c) == hs.at(1, c));
    CHECK(hs.at(2, c) == doctest::Approx(elu_ref(xw[2][c])).epsilon(1e-14));
  }
}

TEST_CASE("GCN: gradients match finite differences") {
  std::mt19937_64 rng(14);
  const auto g = test::random_graph(12, 0.3, rng);
  const EdgeIndex edges = EdgeIndex::of(g);
  const Tensor coef = gcn_coefficients(edges);
  GcnLayer layer(4, 3, true, rng);
  Tensor x = test::random_param({12, 4}, rng);
  ParamList params;
  layer.collect("gcn", params);
  auto ptrs = tensors_of(params);
  ptrs.push_back(&x);
  auto loss = [&](Tape& t) { return probe(t, layer.forward(t, t.parameter(x), edges, coef), 5); };
  CHECK(numerics::grad_check(loss, ptrs, kCheck).max_rel_error < 1e-4);
}

TEST_CASE("initialization: Glorot bounds, zero biases, lambda at 1/d_max, reproducible") {
  std::mt19937_64 r1(77), r2(77);
  GatLayer a(30, 8, 8, true, r1), b(30, 8, 8, true, r2);
  CHECK(a.weight() == b.weight());
  const double bound = std::sqrt(6.0 / (30.0 + 64.0));
  double mx = 0.0;
  for (double v : a.weight().values()) mx = std::max(mx, std::abs(v));
  CHECK(mx <= bound);
  CHECK(mx > 0.9 * bound);
  Dense d(5, 4, r1);
  for (double v : d.bias.values()) CHECK(v == 0.0);
  SetAggregator agg(50);
  for (double v : agg.lambda().values()) CHECK(v == 1.0 / 50.0);
}
