#pragma once

// Data-parallel inner loops. Every kernel exists twice: `serial` is the
// reference implementation kept for tests and benchmarks, `omp` the
// OpenMP-parallel version used by the library. Both compute each output
// element with the same accumulation order, so their results are
// bit-identical. forman_curvature is the exception: the parallel version
// reuses per-node sums and agrees with the reference only up to rounding.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace egat::kernels {

// Rows of a weighted segment sum: out[s] = sum_{e in segment s} w[e, h] * values[value_row[e], h*D:(h+1)*D]
// for every head h. `order` (optional) maps segment slots onto edge ids; when
// empty, slot t addresses edge t.
struct SegmentSpec {
  std::span<const std::size_t> seg_ptr;    // n_segments + 1 offsets into slots
  std::span<const std::size_t> order;      // slot -> edge id (may be empty)
  std::span<const std::size_t> value_row;  // edge id -> row of `values`
};

// One neighbour found by a kNN search.
struct Neighbor {
  double distance;
  std::size_t index;
};

// Per-batch exact kNN. For each query row i and each batch b the k nearest
// members of b (self excluded), ascending by (distance, index).
struct BatchKnnInput {
  std::span<const double> coords;  // n x dims, row-major
  std::size_t n = 0;
  std::size_t dims = 0;
  std::vector<std::vector<std::size_t>> batch_members;  // ascending ids per batch
  std::size_t k = 0;
};

// result[i] holds the neighbours of i, grouped by batch in batch order.
using KnnResult = std::vector<std::vector<Neighbor>>;

// Forman-Ricci curvature per directed CSR edge with unit node weights.
struct CurvatureInput {
  std::span<const std::size_t> row_ptr;
  std::span<const std::size_t> col_idx;
  std::span<const double> weight;
};

#define EGAT_KERNEL_DECLS                                                                    \
  /* C[m x n] = A[m x k] * B[k x n] (+ C when accumulate) */                                 \
  void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,  \
               std::size_t n, bool accumulate);                                            \
  /* C[m x n] = A[m x k] * B[n x k]^T */                                                     \
  void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k,  \
               std::size_t n, bool accumulate);                                            \
  /* C[m x n] = A[k x m]^T * B[k x n] */                                                     \
  void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,  \
               std::size_t n, bool accumulate);                                            \
  void segment_weighted_sum(std::span<const double> weights, std::size_t heads,              \
                            std::span<const double> values, std::size_t head_dim,            \
                            const SegmentSpec& spec, std::span<double> out, bool accumulate); \
  KnnResult batch_knn(const BatchKnnInput& in);                                              \
  std::vector<double> forman_curvature(const CurvatureInput& in);

namespace serial {
EGAT_KERNEL_DECLS
}  // namespace serial

namespace omp {
EGAT_KERNEL_DECLS
}  // namespace omp

#undef EGAT_KERNEL_DECLS

}  // namespace egat::kernels
