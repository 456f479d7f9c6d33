#include "egat/graph/bbknn.hpp"

#include <string>

#include "egat/errors.hpp"
#include "egat/kernels.hpp"

namespace egat::graph {

SparseGraph bbknn_directed(const numerics::Tensor& coords, std::span<const std::size_t> batch_ids,
                           std::size_t n_batches, std::size_t k) {
  if (k == 0) throw ConfigError("bbknn: k must be at least 1");
  const std::size_t n = coords.rows();
  if (batch_ids.size() != n) {
    throw DataError("bbknn: " + std::to_string(batch_ids.size()) + " batch ids for " + std::to_string(n) + " cells");
  }
  if (!coords.all_finite()) throw DataError("bbknn: coordinates contain non-finite values");

  kernels::BatchKnnInput in{coords.data(), n, coords.cols(), std::vector<std::vector<std::size_t>>(n_batches), k};
  for (std::size_t i = 0; i < n; ++i) {
    if (batch_ids[i] >= n_batches) {
      throw DataError("bbknn: cell " + std::to_string(i) + " has batch id " + std::to_string(batch_ids[i]) +
                      " outside [0, " + std::to_string(n_batches) + ")");
    }
    in.batch_members[batch_ids[i]].push_back(i);
  }
  for (std::size_t b = 0; b < n_batches; ++b) {
    if (in.batch_members[b].empty()) throw DataError("bbknn: batch " + std::to_string(b) + " is empty");
  }

  const kernels::KnnResult knn = kernels::omp::batch_knn(in);
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& nb : knn[i]) edges.push_back({i, nb.index, nb.distance});
  }
  return SparseGraph::from_edges(n, std::move(edges));
}

SparseGraph build_bbknn(const numerics::Tensor& coords, std::span<const std::size_t> batch_ids,
                        std::size_t n_batches, std::size_t k) {
  return symmetrize(bbknn_directed(coords, batch_ids, n_batches, k));
}

}  // namespace egat::graph
