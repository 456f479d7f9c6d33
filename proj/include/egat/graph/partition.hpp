#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "egat/graph/sparse_graph.hpp"

namespace egat::graph {

struct PartitionMap {
  std::vector<std::size_t> part;  // part id per node
  std::size_t n_parts = 0;

  std::vector<std::vector<std::size_t>> members() const;
  std::vector<std::size_t> sizes() const;
};

// Largest part size partition_graph may produce: ceil(1.3 * n / parts).
std::size_t partition_size_bound(std::size_t n_nodes, std::size_t parts);

// Multilevel min-cut heuristic on the binary connectivity of g: heavy-edge
// matching down to at most 2 * parts super-nodes, greedy balanced assignment,
// then one boundary refinement pass. Deterministic for a given seed.
PartitionMap partition_graph(const SparseGraph& g, std::size_t parts, std::uint64_t seed);

// Shuffled round-robin assignment; the baseline for cut comparisons.
PartitionMap random_balanced_partition(std::size_t n_nodes, std::size_t parts, std::uint64_t seed);

// Number of undirected node pairs whose endpoints lie in different parts.
std::size_t edge_cut(const SparseGraph& g, const PartitionMap& pm);

}  // namespace egat::graph
