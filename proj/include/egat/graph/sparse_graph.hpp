#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "egat/numerics/tensor.hpp"

namespace egat::graph {

inline constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

struct Edge {
  std::size_t src;
  std::size_t dst;
  double weight;
};

// CSR directed graph. Row u lists the out-neighbours of u; for the attention
// layers, row u is also the neighbourhood node u aggregates over.
struct SparseGraph {
  std::size_t n_nodes = 0;
  std::vector<std::size_t> row_ptr{0};
  std::vector<std::size_t> col_idx;
  std::vector<double> edge_weight;
  numerics::Tensor edge_feat;  // |E| x F, or empty

  std::size_t n_edges() const noexcept { return col_idx.size(); }
  std::size_t degree(std::size_t u) const { return row_ptr[u + 1] - row_ptr[u]; }
  std::size_t edge_feat_dim() const noexcept { return edge_feat.size() == 0 ? 0 : edge_feat.cols(); }
  std::span<const std::size_t> neighbors(std::size_t u) const {
    return {col_idx.data() + row_ptr[u], degree(u)};
  }
  // Edge id of (u, v) or npos.
  std::size_t find_edge(std::size_t u, std::size_t v) const;
  std::size_t max_degree() const;
  // Source node of every edge, in CSR order.
  std::vector<std::size_t> edge_sources() const;

  // Throws DataError when a CSR invariant is broken.
  void validate() const;

  // Builds CSR from an edge list; rows sorted by destination id. Duplicate
  // (src, dst) pairs are a DataError.
  static SparseGraph from_edges(std::size_t n_nodes, std::vector<Edge> edges);
};

// Union of both directions; a pair present both ways keeps the smaller weight.
SparseGraph symmetrize(const SparseGraph& g);
bool is_symmetric(const SparseGraph& g);
// Adds (i, i) for every node lacking one, with the given weight. Edge
// features, if present, are zero for the new rows.
SparseGraph with_self_loops(const SparseGraph& g, double self_weight = 0.0);
SparseGraph without_self_loops(const SparseGraph& g);

struct Subgraph {
  SparseGraph graph;
  std::vector<std::size_t> old_to_new;  // npos when the node was dropped
  std::vector<std::size_t> new_to_old;
  std::vector<std::size_t> edge_origin;  // new edge id -> edge id in the parent
};

// Keeps exactly the edges with both endpoints in `nodes`; new ids follow the
// order of `nodes`. Weights and edge features are carried over.
Subgraph induced_subgraph(const SparseGraph& g, std::span<const std::size_t> nodes);

}  // namespace egat::graph
