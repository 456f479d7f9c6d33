#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "egat/community/louvain.hpp"
#include "egat/edgefeat/edge_features.hpp"
#include "egat/graph/pca.hpp"
#include "egat/graph/sparse_graph.hpp"
#include "egat/harness/config.hpp"
#include "egat/ingest/dataset.hpp"

namespace egat::harness {

// One split's graph and inputs. The graph is the symmetric BB-kNN graph of
// the split with a zero-weight self-loop per node; once edge features are
// attached, graph.edge_feat holds the E x 18 table in CSR order.
struct SplitData {
  graph::SparseGraph graph;
  numerics::Tensor features;         // cells x genes, z-scored with training statistics
  std::vector<int> labels;           // -1 = unlabelled
  std::vector<std::size_t> cells;    // row of each node in the filtered dataset
  std::vector<std::size_t> batches;  // dataset-wide batch id per node
  numerics::Tensor pca;              // cells x pca dims, used to build the graph

  std::size_t size() const noexcept { return cells.size(); }
};

struct PreparedData {
  ingest::CellDataset dataset;  // filtered and normalized
  ingest::SplitAssignment assignment;
  std::array<SplitData, 3> splits;  // train, val, test
  std::vector<double> gene_mean, gene_sd;
  graph::PcaModel pca;
  community::LouvainResult clusters;  // on the training graph
  edgefeat::EdgeFeatureReport edge_report;
  bool has_edge_features = false;
  std::size_t n_classes = 0;
  std::size_t d_max = 0;  // largest node neighbourhood over all split graphs

  const SplitData& train() const { return splits[0]; }
  const SplitData& val() const { return splits[1]; }
  const SplitData& test() const { return splits[2]; }
};

// Per-column mean and population sd of x; a zero sd is reported as 1.
void column_stats(const numerics::Tensor& x, std::vector<double>& mean, std::vector<double>& sd);
numerics::Tensor standardize(const numerics::Tensor& x, const std::vector<double>& mean, const std::vector<double>& sd);

// Filter + normalize, split, standardize, PCA fitted on train, one BB-kNN
// graph per split (batches absent from a split are skipped), self-loops.
// DataError when the dataset is unlabelled or a split ends up empty.
PreparedData prepare_graphs(const ingest::CellDataset& raw, const TrainConfig& cfg);
// Louvain on the training graph, auxiliary models and per-split tables.
void attach_edge_features(PreparedData& data, const TrainConfig& cfg);
// Both steps.
PreparedData prepare(const ingest::CellDataset& raw, const TrainConfig& cfg);

// Copy of the split whose edge-feature columns outside `mask` are zero.
SplitData with_feature_mask(const SplitData& s, const edgefeat::FeatureMask& mask);

}  // namespace egat::harness
