#include <cmath>
#include <random>
#include <tuple>
#include <vector>

#include "doctest.h"
#include "egat/kernels.hpp"

namespace k = egat::kernels;

namespace {

std::vector<double> random_vec(std::size_t n, std::mt19937_64& rng, double lo = -1, double hi = 1) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

}  // namespace

TEST_CASE("gemm variants: omp is bit-identical to the serial reference") {
  std::mt19937_64 rng(1);
  for (auto [m, kk, n] : std::vector<std::tuple<std::size_t, std::size_t, std::size_t>>{{1, 1, 1}, {7, 5, 3}, {300, 40, 64}}) {
    const auto a = random_vec(m * kk, rng);
    const auto b = random_vec(kk * n, rng);
    const auto bt = random_vec(n * kk, rng);
    const auto at = random_vec(kk * m, rng);
    const auto c0 = random_vec(m * n, rng);
    for (bool acc : {false, true}) {
      auto c1 = c0, c2 = c0;
      k::serial::gemm_nn(a.data(), b.data(), c1.data(), m, kk, n, acc);
      k::omp::gemm_nn(a.data(), b.data(), c2.data(), m, kk, n, acc);
      CHECK(c1 == c2);
      c1 = c0, c2 = c0;
      k::serial::gemm_nt(a.data(), bt.data(), c1.data(), m, kk, n, acc);
      k::omp::gemm_nt(a.data(), bt.data(), c2.data(), m, kk, n, acc);
      CHECK(c1 == c2);
      c1 = c0, c2 = c0;
      k::serial::gemm_tn(at.data(), b.data(), c1.data(), m, kk, n, acc);
      k::omp::gemm_tn(at.data(), b.data(), c2.data(), m, kk, n, acc);
      CHECK(c1 == c2);
    }
  }
}

TEST_CASE("segment_weighted_sum: omp matches serial, with and without order") {
  std::mt19937_64 rng(2);
  const std::size_t n = 500, heads = 4, hd = 3;
  std::vector<std::size_t> ptr{0};
  for (std::size_t i = 0; i < n; ++i) ptr.push_back(ptr.back() + rng() % 7);
  const std::size_t e = ptr.back();
  std::vector<std::size_t> src(e), order(e);
  for (auto& s : src) s = rng() % n;
  for (std::size_t i = 0; i < e; ++i) order[i] = e - 1 - i;
  const auto w = random_vec(e * heads, rng);
  const auto values = random_vec(n * heads * hd, rng);
  for (bool use_order : {false, true}) {
    k::SegmentSpec spec{ptr, use_order ? std::span<const std::size_t>(order) : std::span<const std::size_t>{}, src};
    std::vector<double> o1(n * heads * hd), o2(n * heads * hd);
    k::serial::segment_weighted_sum(w, heads, values, hd, spec, o1, false);
    k::omp::segment_weighted_sum(w, heads, values, hd, spec, o2, false);
    CHECK(o1 == o2);
  }
}

TEST_CASE("batch_knn: omp matches serial") {
  std::mt19937_64 rng(3);
  const std::size_t n = 400, dims = 6;
  auto coords = random_vec(n * dims, rng);
  // duplicate a few points to exercise distance ties
  for (std::size_t d = 0; d < dims; ++d) coords[10 * dims + d] = coords[20 * dims + d];
  k::BatchKnnInput in{coords, n, dims, std::vector<std::vector<std::size_t>>(4), 5};
  for (std::size_t i = 0; i < n; ++i) in.batch_members[rng() % 4].push_back(i);
  const auto r1 = k::serial::batch_knn(in);
  const auto r2 = k::omp::batch_knn(in);
  REQUIRE(r1.size() == r2.size());
  for (std::size_t i = 0; i < n; ++i) {
    REQUIRE(r1[i].size() == r2[i].size());
    for (std::size_t j = 0; j < r1[i].size(); ++j) {
      CHECK(r1[i][j].index == r2[i][j].index);
      CHECK(r1[i][j].distance == r2[i][j].distance);
    }
  }
}

TEST_CASE("forman_curvature: omp agrees with the direct serial formula") {
  std::mt19937_64 rng(4);
  // random symmetric graph
  const std::size_t n = 60;
  std::vector<std::vector<std::pair<std::size_t, double>>> adj(n);
  for (std::size_t u = 0; u < n; ++u)
    for (std::size_t v = u + 1; v < n; ++v)
      if (rng() % 6 == 0) {
        const double w = 0.1 + static_cast<double>(rng() % 1000) / 100.0;
        adj[u].push_back({v, w});
        adj[v].push_back({u, w});
      }
  std::vector<std::size_t> ptr{0}, col;
  std::vector<double> w;
  for (auto& row : adj) {
    for (auto [v, x] : row) {
      col.push_back(v);
      w.push_back(x);
    }
    ptr.push_back(col.size());
  }
  const auto c1 = k::serial::forman_curvature({ptr, col, w});
  const auto c2 = k::omp::forman_curvature({ptr, col, w});
  for (std::size_t e = 0; e < c1.size(); ++e) CHECK(std::abs(c1[e] - c2[e]) < 1e-12 * std::max(1.0, std::abs(c1[e])));
}
