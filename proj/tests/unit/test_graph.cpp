#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include "doctest.h"
#include "egat/errors.hpp"
#include "egat/graph/bbknn.hpp"
#include "egat/graph/graph_io.hpp"
#include "egat/graph/partition.hpp"
#include "egat/graph/pca.hpp"
#include "egat/graph/sparse_graph.hpp"
#include "support.hpp"

using namespace egat::graph;
using egat::numerics::Tensor;

namespace {

// Brute-force batch-balanced kNN: full sort of all candidates per batch.
std::set<std::tuple<std::size_t, std::size_t, double>> knn_oracle(const Tensor& x, const std::vector<std::size_t>& batch,
                                                                   std::size_t n_batches, std::size_t k) {
  std::set<std::tuple<std::size_t, std::size_t, double>> out;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t b = 0; b < n_batches; ++b) {
      std::vector<std::pair<double, std::size_t>> cand;
      for (std::size_t j = 0; j < x.rows(); ++j) {
        if (j == i || batch[j] != b) continue;
        double s = 0;
        for (std::size_t d = 0; d < x.cols(); ++d) s += (x.at(i, d) - x.at(j, d)) * (x.at(i, d) - x.at(j, d));
        cand.push_back({std::sqrt(s), j});
      }
      std::sort(cand.begin(), cand.end());
      for (std::size_t t = 0; t < std::min(k, cand.size()); ++t) out.insert({i, cand[t].second, cand[t].first});
    }
  }
  return out;
}

std::set<std::tuple<std::size_t, std::size_t, double>> edge_set(const SparseGraph& g) {
  std::set<std::tuple<std::size_t, std::size_t, double>> out;
  for (std::size_t u = 0; u < g.n_nodes; ++u)
    for (std::size_t e = g.row_ptr[u]; e < g.row_ptr[u + 1]; ++e) out.insert({u, g.col_idx[e], g.edge_weight[e]});
  return out;
}

SparseGraph two_cliques() {
  std::vector<Edge> edges;
  for (std::size_t base : {0u, 10u})
    for (std::size_t u = 0; u < 10; ++u)
      for (std::size_t v = 0; v < 10; ++v)
        if (u != v) edges.push_back({base + u, base + v, 1.0});
  return SparseGraph::from_edges(20, edges);
}

// Points scattered around a few centres; gives graphs with community structure.
Tensor clustered_points(std::size_t n, std::size_t dims, std::size_t centres, std::mt19937_64& rng) {
  Tensor c = egat::test::random_tensor({centres, dims}, rng, -10, 10);
  Tensor x = egat::test::random_tensor({n, dims}, rng, -1, 1);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t d = 0; d < dims; ++d) x.at(i, d) += c.at(i % centres, d);
  return x;
}

}  // namespace

TEST_CASE("SparseGraph construction and validation") {
  auto g = SparseGraph::from_edges(3, {{2, 0, 1.5}, {0, 1, 0.5}, {0, 2, 2.0}});
  CHECK(g.row_ptr == std::vector<std::size_t>{0, 2, 2, 3});
  CHECK(g.col_idx == std::vector<std::size_t>{1, 2, 0});
  CHECK(g.find_edge(0, 2) == 1);
  CHECK(g.find_edge(1, 0) == npos);
  CHECK_NOTHROW(g.validate());
  CHECK_THROWS_AS(SparseGraph::from_edges(2, {{0, 1, 1}, {0, 1, 2}}), egat::DataError);
  CHECK_THROWS_AS(SparseGraph::from_edges(2, {{0, 2, 1}}), egat::IndexError);
  g.col_idx[0] = 7;
  CHECK_THROWS_AS(g.validate(), egat::DataError);

  const auto s = symmetrize(SparseGraph::from_edges(3, {{0, 1, 0.5}, {2, 0, 1.5}}));
  CHECK(is_symmetric(s));
  CHECK(s.n_edges() == 4);
  const auto loops = with_self_loops(s);
  CHECK(loops.n_edges() == 7);
  for (std::size_t u = 0; u < 3; ++u) CHECK(loops.find_edge(u, u) != npos);
  CHECK(edge_set(without_self_loops(loops)) == edge_set(s));
}

TEST_CASE("pca: diagonal covariance is recovered up to sign") {
  std::mt19937_64 rng(5);
  const std::size_t n = 400;
  Tensor x = egat::test::random_tensor({n, 3}, rng);
  const double scale[3] = {5.0, 2.0, 0.5};
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t d = 0; d < 3; ++d) x.at(i, d) *= scale[d];
  // decorrelate the sample exactly so the eigenbasis is the identity
  std::vector<double> mean(3, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t d = 0; d < 3; ++d) mean[d] += x.at(i, d) / n;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t d = 0; d < 3; ++d) x.at(i, d) -= mean[d];
  for (std::size_t a = 0; a < 3; ++a)
    for (std::size_t b = a + 1; b < 3; ++b) {
      double cab = 0, caa = 0;
      for (std::size_t i = 0; i < n; ++i) {
        cab += x.at(i, a) * x.at(i, b);
        caa += x.at(i, a) * x.at(i, a);
      }
      for (std::size_t i = 0; i < n; ++i) x.at(i, b) -= cab / caa * x.at(i, a);
    }
  const auto [model, z] = pca_fit_project(x, 3);
  for (std::size_t c = 0; c < 3; ++c) {
    CHECK(std::abs(std::abs(model.components.at(c, c)) - 1.0) < 1e-8);
    for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(std::abs(z.at(i, c)) - std::abs(x.at(i, c))) < 1e-8);
  }
}

TEST_CASE("pca: rank-1 data, reconstruction, orthonormality, sign convention") {
  std::mt19937_64 rng(6);
  const std::size_t n = 100, p = 12;
  Tensor u = egat::test::random_tensor({n}, rng), v = egat::test::random_tensor({p}, rng);
  Tensor noise = egat::test::random_tensor({n, p}, rng, -1e-9, 1e-9);
  Tensor x = Tensor::matrix(n, p);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < p; ++j) x.at(i, j) = u[i] * v[j] + noise.at(i, j);
  {
    const auto [model, z] = pca_fit_project(x, 5);
    const double total = std::accumulate(model.explained_variance.begin(), model.explained_variance.end(), 0.0);
    CHECK(model.explained_variance[0] / total >= 0.999);
  }

  Tensor full = egat::test::random_tensor({n, p}, rng);
  const auto [model, z] = pca_fit_project(full, p);
  const Tensor back = model.reconstruct(z);
  for (std::size_t i = 0; i < full.size(); ++i) CHECK(std::abs(back[i] - full[i]) < 1e-8);
  for (std::size_t a = 0; a < p; ++a) {
    for (std::size_t b = 0; b < p; ++b) {
      double dot = 0;
      for (std::size_t r = 0; r < p; ++r) dot += model.components.at(r, a) * model.components.at(r, b);
      CHECK(std::abs(dot - (a == b ? 1.0 : 0.0)) < 1e-8);
    }
    if (a > 0) CHECK(model.explained_variance[a] <= model.explained_variance[a - 1]);
    std::size_t best = 0;
    for (std::size_t r = 1; r < p; ++r)
      if (std::abs(model.components.at(r, a)) > std::abs(model.components.at(best, a))) best = r;
    CHECK(model.components.at(best, a) > 0);
  }
  CHECK(pca_fit_project(full).first.dims() == p);
  CHECK_THROWS_AS(pca_fit_project(full, p + 1), egat::ConfigError);
}

TEST_CASE("pca: more features than samples uses the sample Gram matrix") {
  std::mt19937_64 rng(7);
  Tensor x = egat::test::random_tensor({10, 40}, rng);
  const auto [model, z] = pca_fit_project(x);
  CHECK(model.dims() == 9);
  for (std::size_t a = 0; a < 9; ++a)
    for (std::size_t b = 0; b < 9; ++b) {
      double dot = 0;
      for (std::size_t r = 0; r < 40; ++r) dot += model.components.at(r, a) * model.components.at(r, b);
      CHECK(std::abs(dot - (a == b ? 1.0 : 0.0)) < 1e-8);
    }
  // nine components span the centred data of ten points
  const Tensor back = model.reconstruct(z);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::abs(back[i] - x[i]) < 1e-8);
}

TEST_CASE("bbknn: worked examples") {
  SUBCASE("three points on a line, k=1") {
    Tensor x = Tensor::matrix({{0}, {1}, {10}});
    std::vector<std::size_t> b(3, 0);
    const auto g = build_bbknn(x, b, 1, 1);
    CHECK(edge_set(g) == std::set<std::tuple<std::size_t, std::size_t, double>>{
                             {0, 1, 1.0}, {1, 0, 1.0}, {2, 1, 9.0}, {1, 2, 9.0}});
  }
  SUBCASE("two batches of four collinear points, k=3") {
    Tensor x = Tensor::matrix({{0}, {1}, {2}, {3}, {0.5}, {1.5}, {2.5}, {3.5}});
    std::vector<std::size_t> b{0, 0, 0, 0, 1, 1, 1, 1};
    const auto d = bbknn_directed(x, b, 2, 3);
    for (std::size_t u = 0; u < 8; ++u) {
      std::size_t per[2] = {0, 0};
      for (std::size_t v : d.neighbors(u)) ++per[b[v]];
      CHECK(per[0] == 3);
      CHECK(per[1] == 3);
    }
    const auto g = build_bbknn(x, b, 2, 3);
    for (std::size_t u = 0; u < 8; ++u) CHECK(g.degree(u) <= 7);
    CHECK(edge_set(d) == knn_oracle(x, b, 2, 3));
  }
  SUBCASE("k at least batch size saturates") {
    std::mt19937_64 rng(8);
    Tensor x = egat::test::random_tensor({9, 2}, rng);
    std::vector<std::size_t> b{0, 1, 2, 0, 1, 2, 0, 1, 2};
    const auto g = build_bbknn(x, b, 3, 5);
    for (std::size_t u = 0; u < 9; ++u) CHECK(g.degree(u) == 8);
  }
  SUBCASE("errors") {
    Tensor x = Tensor::matrix({{0}, {1}});
    std::vector<std::size_t> b{0, 0};
    CHECK_THROWS_AS(build_bbknn(x, b, 2, 1), egat::DataError);
    CHECK_THROWS_AS(build_bbknn(x, b, 1, 0), egat::ConfigError);
    std::vector<std::size_t> bad{0, 3};
    CHECK_THROWS_AS(build_bbknn(x, bad, 2, 1), egat::DataError);
  }
}

TEST_CASE("bbknn: matches a brute-force oracle, balanced and symmetric") {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    std::mt19937_64 rng(100 + seed);
    const std::size_t n = 60 + rng() % 60, nb = 1 + rng() % 4, k = 1 + rng() % 4;
    // integer coordinates create many distance ties
    Tensor x = Tensor::matrix(n, 3);
    for (double& v : x.values()) v = static_cast<double>(rng() % 5);
    std::vector<std::size_t> b(n);
    for (std::size_t i = 0; i < n; ++i) b[i] = i < nb ? i : rng() % nb;
    const auto d = bbknn_directed(x, b, nb, k);
    CHECK(edge_set(d) == knn_oracle(x, b, nb, k));
    std::vector<std::size_t> count(nb, 0);
    for (std::size_t bi : b) ++count[bi];
    for (std::size_t u = 0; u < n; ++u) {
      std::vector<std::size_t> per(nb, 0);
      for (std::size_t v : d.neighbors(u)) ++per[b[v]];
      for (std::size_t bb = 0; bb < nb; ++bb) CHECK(per[bb] == std::min(k, count[bb] - (b[u] == bb ? 1 : 0)));
    }
    const auto g = build_bbknn(x, b, nb, k);
    CHECK(is_symmetric(g));
    CHECK_NOTHROW(g.validate());
  }
}

TEST_CASE("partition: small examples") {
  const auto g = two_cliques();
  const auto one = partition_graph(g, 1, 3);
  CHECK(std::all_of(one.part.begin(), one.part.end(), [](std::size_t p) { return p == 0; }));
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto pm = partition_graph(g, 2, seed);
    CHECK(edge_cut(g, pm) == 0);
    CHECK(pm.sizes() == std::vector<std::size_t>{10, 10});
  }
  CHECK_THROWS_AS(partition_graph(g, 0, 1), egat::ConfigError);
  CHECK_THROWS_AS(partition_graph(g, 21, 1), egat::ConfigError);
  CHECK(partition_graph(g, 5, 9).part == partition_graph(g, 5, 9).part);
}

TEST_CASE("partition: contract holds and beats random assignment") {
  std::mt19937_64 rng(11);
  const std::size_t n = 600;
  Tensor x = clustered_points(n, 5, 12, rng);
  std::vector<std::size_t> b(n);
  for (std::size_t i = 0; i < n; ++i) b[i] = i % 2;
  const auto g = build_bbknn(x, b, 2, 3);
  std::size_t wins = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    for (std::size_t parts : {3u, 8u, 37u}) {
      const auto pm = partition_graph(g, parts, seed);
      const auto sizes = pm.sizes();
      CHECK(pm.part.size() == n);
      for (std::size_t s : sizes) {
        CHECK(s >= 1);
        CHECK(s <= partition_size_bound(n, parts));
      }
      if (parts == 8) wins += edge_cut(g, pm) <= edge_cut(g, random_balanced_partition(n, parts, seed)) ? 1 : 0;
    }
  }
  CHECK(wins == 20);

  // every node its own part
  const auto all = partition_graph(g, n, 1);
  auto sorted = all.part;
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::size_t> ids(n);
  std::iota(ids.begin(), ids.end(), 0);
  CHECK(sorted == ids);
}

TEST_CASE("induced_subgraph") {
  const auto g = two_cliques();
  std::vector<std::size_t> all(20);
  std::iota(all.begin(), all.end(), 0);
  const auto full = induced_subgraph(g, all);
  CHECK(edge_set(full.graph) == edge_set(g));

  const std::vector<std::size_t> single{4};
  CHECK(induced_subgraph(g, single).graph.n_edges() == 0);

  const auto pm = partition_graph(g, 2, 0);
  const auto part = pm.members()[0];
  const auto sub = induced_subgraph(g, part);
  CHECK(sub.graph.n_nodes == 10);
  for (std::size_t u = 0; u < 10; ++u) CHECK(sub.graph.degree(u) == 9);

  SparseGraph wf = symmetrize(SparseGraph::from_edges(4, {{0, 1, 1}, {1, 2, 2}, {2, 3, 3}}));
  wf.edge_feat = Tensor::matrix(wf.n_edges(), 2);
  for (std::size_t e = 0; e < wf.n_edges(); ++e) wf.edge_feat.at(e, 0) = static_cast<double>(e);
  const std::vector<std::size_t> keep{2, 1};
  const auto s2 = induced_subgraph(wf, keep);
  CHECK(s2.graph.n_edges() == 2);
  CHECK(s2.graph.col_idx == std::vector<std::size_t>{1, 0});
  CHECK(s2.graph.edge_weight == std::vector<double>{2, 2});
  for (std::size_t e = 0; e < 2; ++e) CHECK(s2.graph.edge_feat.at(e, 0) == static_cast<double>(s2.edge_origin[e]));
  CHECK(s2.old_to_new[3] == npos);

  const std::vector<std::size_t> bad{1, 20}, dup{1, 1};
  CHECK_THROWS_AS(induced_subgraph(g, bad), egat::IndexError);
  CHECK_THROWS_AS(induced_subgraph(g, dup), egat::IndexError);
}

TEST_CASE("graph text format round-trips bit-exactly") {
  std::mt19937_64 rng(12);
  SparseGraph g = build_bbknn(egat::test::random_tensor({30, 4}, rng), std::vector<std::size_t>(30, 0), 1, 3);
  g.edge_feat = egat::test::random_tensor({g.n_edges(), 3}, rng, -1e6, 1e6);
  g.edge_feat[0] = 0.1;
  g.edge_feat[1] = 1.0 / 3.0;
  g.edge_feat[2] = std::numeric_limits<double>::denorm_min();
  g.edge_feat[3] = -0.0;
  g.edge_weight[0] = 1e-300;
  std::stringstream ss;
  write_graph(ss, g);
  const auto back = read_graph(ss);
  CHECK(back.row_ptr == g.row_ptr);
  CHECK(back.col_idx == g.col_idx);
  CHECK(back.edge_weight == g.edge_weight);
  CHECK(back.edge_feat == g.edge_feat);
  CHECK(std::signbit(back.edge_feat[3]));

  std::stringstream isolated("nodes=3 edges=1 efeat=0\n2 0 1.5\n");
  const auto h = read_graph(isolated);
  CHECK(h.n_nodes == 3);
  CHECK(h.degree(2) == 1);

  for (const char* bad : {"nodes=2 edges=1\n", "nodes=2 edges=1 efeat=0\n0 5 1\n", "nodes=2 edges=2 efeat=0\n0 1 1\n",
                          "nodes=2 edges=1 efeat=1\n0 1 1\n", "nodes=2 edges=1 efeat=0\n0 1 x\n"}) {
    std::stringstream s(bad);
    CHECK_THROWS_AS(read_graph(s), egat::DataError);
  }
}
