// Serial reference vs OpenMP kernels at training-relevant sizes.
//   ./bench_kernels --benchmark_filter=gemm

#include <benchmark/benchmark.h>

#include <numeric>
#include <random>
#include <vector>

#include "egat/kernels.hpp"

namespace k = egat::kernels;

namespace {

std::vector<double> random_vec(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

// node features x layer weights: 2100 cells, 200 genes, 64 hidden units
template <auto Gemm>
void BM_gemm(benchmark::State& state) {
  const std::size_t m = static_cast<std::size_t>(state.range(0)), kk = 200, n = 64;
  auto a = random_vec(m * kk, 1), b = random_vec(kk * n, 2);
  std::vector<double> c(m * n);
  for (auto _ : state) {
    Gemm(a.data(), b.data(), c.data(), m, kk, n, false);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(static_cast<int64_t>(state.iterations() * m * kk * n));
}
BENCHMARK(BM_gemm<k::serial::gemm_nn>)->Name("gemm_nn/serial")->Arg(512)->Arg(2100);
BENCHMARK(BM_gemm<k::omp::gemm_nn>)->Name("gemm_nn/omp")->Arg(512)->Arg(2100);

// GAT aggregation over a kNN-like graph with 8 heads of width 8
template <auto Agg>
void BM_segment(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0)), deg = 12, heads = 8, hd = 8;
  std::vector<std::size_t> ptr(n + 1), src(n * deg);
  std::mt19937_64 rng(3);
  for (std::size_t i = 0; i <= n; ++i) ptr[i] = i * deg;
  for (auto& s : src) s = rng() % n;
  auto alpha = random_vec(n * deg * heads, 4), values = random_vec(n * heads * hd, 5);
  std::vector<double> out(n * heads * hd);
  for (auto _ : state) {
    Agg(alpha, heads, values, hd, {ptr, {}, src}, out, false);
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_segment<k::serial::segment_weighted_sum>)->Name("segment_sum/serial")->Arg(2100)->Arg(20000);
BENCHMARK(BM_segment<k::omp::segment_weighted_sum>)->Name("segment_sum/omp")->Arg(2100)->Arg(20000);

template <auto Knn>
void BM_knn(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0)), dims = 50;
  auto coords = random_vec(n * dims, 6);
  k::BatchKnnInput in{coords, n, dims, std::vector<std::vector<std::size_t>>(3), 3};
  for (std::size_t i = 0; i < n; ++i) in.batch_members[i % 3].push_back(i);
  for (auto _ : state) benchmark::DoNotOptimize(Knn(in));
}
BENCHMARK(BM_knn<k::serial::batch_knn>)->Name("batch_knn/serial")->Arg(1000)->Arg(2100);
BENCHMARK(BM_knn<k::omp::batch_knn>)->Name("batch_knn/omp")->Arg(1000)->Arg(2100);

template <auto Curv>
void BM_curvature(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0)), deg = 12;
  std::vector<std::size_t> ptr(n + 1), col(n * deg);
  for (std::size_t i = 0; i <= n; ++i) ptr[i] = i * deg;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t d = 0; d < deg; ++d) col[i * deg + d] = (i + d + 1) % n;
  auto w = random_vec(n * deg, 7);
  for (double& x : w) x = 1.5 + x;
  for (auto _ : state) benchmark::DoNotOptimize(Curv({ptr, col, w}));
}
BENCHMARK(BM_curvature<k::serial::forman_curvature>)->Name("forman/serial")->Arg(2100)->Arg(20000);
BENCHMARK(BM_curvature<k::omp::forman_curvature>)->Name("forman/omp")->Arg(2100)->Arg(20000);

}  // namespace

BENCHMARK_MAIN();
