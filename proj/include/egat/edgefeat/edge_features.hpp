#pragma once

#include <bitset>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "egat/edgefeat/auxiliary.hpp"
#include "egat/edgefeat/node2vec.hpp"
#include "egat/graph/sparse_graph.hpp"
#include "egat/numerics/tensor.hpp"

namespace egat::edgefeat {

inline constexpr std::size_t kEdgeFeatureWidth = 18;

// Column blocks: cluster attention [0, 8), batch attention [8, 16),
// curvature 16, node2vec 17.
enum class FeatureBlock { cluster, batch, curvature, node2vec };

struct ColumnRange {
  std::size_t begin = 0;
  std::size_t end = 0;
};
ColumnRange block_columns(FeatureBlock b);

// Bit c set keeps column c; cleared columns are zeroed.
using FeatureMask = std::bitset<kEdgeFeatureWidth>;
FeatureMask mask_of(std::initializer_list<FeatureBlock> blocks);
inline FeatureMask full_mask() { return FeatureMask{}.set(); }
// Row label used in ablation tables, e.g. "Cluster + batch label".
std::string mask_name(const FeatureMask& m);
// Zeroes the cleared columns of an E x 18 table in place.
void apply_mask(numerics::Tensor& features, const FeatureMask& m);

// Training-graph statistics used to standardize the two scalar columns.
struct ScalarStats {
  double curvature_mean = 0.0, curvature_sd = 1.0;
  double node2vec_mean = 0.0, node2vec_sd = 1.0;
};
// Population mean and standard deviation; a zero deviation is replaced by 1.
ScalarStats fit_scalar_stats(std::span<const double> curvature, std::span<const double> node2vec);

// Concatenates the blocks in the fixed order and standardizes columns 16 and
// 17 with `stats`. Throws InternalError when row counts differ.
numerics::Tensor assemble_edge_features(const numerics::Tensor& aux_cluster, const numerics::Tensor& aux_batch,
                                        std::span<const double> curvature, std::span<const double> node2vec,
                                        const ScalarStats& stats);

struct EdgeFeatureConfig {
  AuxConfig aux;
  Node2vecConfig node2vec;
  // Curvature sees every non-loop weight raised to this fraction of the
  // graph's mean weight, so coincident cells do not produce a zero weight.
  double weight_floor_fraction = 1e-6;
  // Standardize the two scalar columns of every graph with that graph's own
  // statistics instead of the training graph's.
  bool per_graph_scalar_stats = true;
};

struct SplitGraph {
  const graph::SparseGraph* graph = nullptr;  // symmetric, with self-loops
  const numerics::Tensor* node_features = nullptr;
};

struct EdgeFeatureReport {
  double cluster_val_accuracy = 0.0;
  double batch_val_accuracy = 0.0;
  std::size_t cluster_classes = 0;
  std::size_t batch_classes = 0;
  ScalarStats stats;
  std::vector<std::size_t> node2vec_singletons;  // per split
};

// Trains both auxiliary models on splits[0] (the training graph) with the
// given cluster and batch labels, then computes every split's E x 18 table.
// The scalar columns are standardized per graph, or with the statistics of
// splits[0] when per_graph_scalar_stats is off. The report holds the
// statistics of splits[0] either way.
std::vector<numerics::Tensor> build_edge_features(const std::vector<SplitGraph>& splits,
                                                  std::span<const int> train_clusters,
                                                  std::span<const int> train_batches, const EdgeFeatureConfig& cfg,
                                                  EdgeFeatureReport* report = nullptr);

}  // namespace egat::edgefeat
