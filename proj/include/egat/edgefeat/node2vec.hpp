#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "egat/graph/sparse_graph.hpp"
#include "egat/numerics/tensor.hpp"

namespace egat::edgefeat {

struct Node2vecConfig {
  std::size_t dims = 64;
  std::size_t walks_per_node = 10;
  std::size_t walk_length = 80;
  std::size_t window = 10;
  double p = 1.0;  // return parameter
  double q = 1.0;  // in-out parameter
  std::size_t negatives = 5;
  std::size_t epochs = 1;  // passes over the walk corpus
  double learning_rate = 0.025;
  std::uint64_t seed = 0;

  void validate() const;  // ConfigError unless every field is positive
};

struct Node2vecResult {
  numerics::Tensor embedding;          // nodes x dims
  std::vector<std::size_t> singletons;  // nodes without neighbours; their rows stay at the random init
};

// Second-order random walks on the binary adjacency (self-loops ignored).
// walks[r * n + u] is the r-th walk started at u; each has walk_length nodes
// unless u is isolated.
std::vector<std::vector<std::size_t>> node2vec_walks(const graph::SparseGraph& g, const Node2vecConfig& cfg);

// Walks followed by skip-gram with negative sampling, trained by plain SGD
// with a linearly decaying step. Deterministic for a given seed.
Node2vecResult node2vec_embed(const graph::SparseGraph& g, const Node2vecConfig& cfg);

// <emb_u, emb_v> for every stored edge in CSR order; a self-loop scores ||emb_u||^2.
std::vector<double> node2vec_edge_score(const numerics::Tensor& embedding, const graph::SparseGraph& g);

}  // namespace egat::edgefeat
