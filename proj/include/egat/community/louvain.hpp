#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "egat/graph/sparse_graph.hpp"

namespace egat::community {

// Community id per node; ids are contiguous from 0.
struct Partition {
  std::vector<std::size_t> community;
  std::size_t n_communities = 0;

  // Renumbers ids to 0..k-1 in order of first appearance.
  static Partition from_labels(const std::vector<std::size_t>& labels);
};

// Newman modularity with resolution gamma. With binary=true every stored
// edge counts with weight 1. Expects a symmetric graph.
double modularity(const graph::SparseGraph& g, const Partition& p, double resolution = 1.0, bool binary = false);

struct LouvainOptions {
  double resolution = 1.0;
  std::uint64_t seed = 0;
  bool binary = true;        // ignore stored weights
  double tolerance = 1e-12;  // minimum modularity gain for a move
};

struct LouvainResult {
  Partition partition;
  std::vector<double> modularity_per_pass;  // after each aggregation level
};

// Two-phase Louvain: shuffled local moves until no gain exceeds the
// tolerance, then aggregation, repeated until a level makes no move.
LouvainResult louvain(const graph::SparseGraph& g, const LouvainOptions& opt = {});

// CSV with header `node_id,community`.
void write_partition_csv(const std::filesystem::path& path, const Partition& p);
Partition read_partition_csv(const std::filesystem::path& path);

}  // namespace egat::community
