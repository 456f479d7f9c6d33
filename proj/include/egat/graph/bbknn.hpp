#pragma once

#include <cstddef>
#include <span>

#include "egat/graph/sparse_graph.hpp"
#include "egat/numerics/tensor.hpp"

namespace egat::graph {

// Directed batch-balanced kNN: node i points at its min(k, |b| - [i in b])
// exact Euclidean nearest neighbours inside every batch b (self excluded),
// ties broken by node id. Edge weight is the distance. Batch ids must lie in
// [0, n_batches) and every batch must have at least one member.
SparseGraph bbknn_directed(const numerics::Tensor& coords, std::span<const std::size_t> batch_ids,
                           std::size_t n_batches, std::size_t k);

// bbknn_directed followed by a union symmetrization.
SparseGraph build_bbknn(const numerics::Tensor& coords, std::span<const std::size_t> batch_ids,
                        std::size_t n_batches, std::size_t k);

}  // namespace egat::graph
