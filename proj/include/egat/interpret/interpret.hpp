#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "egat/graph/sparse_graph.hpp"
#include "egat/model/egat_model.hpp"

namespace egat::interpret {

// Per edge (CSR order of b.graph): the attention the set encoder pays to the
// edge's feature row while encoding the edge's source node set, as the mean
// over query rows and heads. Weights of one node's set sum to 1.
// ConfigError unless the model encodes edge sets with the set transformer.
std::vector<double> attention_adjacency(model::EgatModel& m, const model::NodeBatch& b);
// Same structure as g with the given per-edge weights and no edge features.
graph::SparseGraph reweighted(const graph::SparseGraph& g, const std::vector<double>& weights);

struct FeatureScore {
  std::size_t feature = 0;
  double score = 0.0;
};
// Row L2 norms of the first GAT layer's weight averaged over heads, best
// first, ties by lower index; top_k is clipped to the input width.
std::vector<FeatureScore> feature_saliency(model::EgatModel& m, std::size_t top_k);
// The same score computed per head (one ranked list per head).
std::vector<std::vector<FeatureScore>> feature_saliency_per_head(model::EgatModel& m, std::size_t top_k);

struct ExplainConfig {
  std::size_t steps = 200;
  double learning_rate = 0.05;
  double size_weight = 0.005;  // edge mask
  double entropy_weight = 0.1;
  double feature_size_weight = 1.0;  // feature mask
  double feature_entropy_weight = 0.1;
  std::size_t hops = 2;
  std::uint64_t seed = 0;
};

struct ExplanationResult {
  std::size_t node = 0;                     // id in the explained graph
  int predicted_class = 0;
  double original_probability = 0.0;        // of predicted_class, no masks
  std::vector<std::size_t> subgraph_nodes;  // ids in the explained graph, sorted
  std::vector<std::size_t> edge_src, edge_dst;  // subgraph edges, ids in the explained graph
  std::vector<double> edge_mask;            // in [0, 1], one per subgraph edge
  std::vector<double> feature_mask;         // in [0, 1], one per input feature
  double retention = 0.0;                   // probability of predicted_class under the final masks
  std::vector<double> objective;            // per optimisation step

  // Feature ids by mask value, highest first, ties by index.
  std::vector<std::size_t> top_features(std::size_t k) const;
  // Indices into edge_src/edge_dst by mask value, highest first.
  std::vector<std::size_t> top_edges(std::size_t k) const;
  // One-line summary. Features are printed by name when `feature_names`
  // covers them, by index otherwise.
  std::string to_record(std::size_t k_features = 10, std::size_t k_edges = 10,
                        const std::vector<std::string>& feature_names = {}) const;
};

// Nodes within `hops` of `node` in the batch graph, sorted.
std::vector<std::size_t> k_hop_nodes(const graph::SparseGraph& g, std::size_t node, std::size_t hops);
// Sub-batch induced by `nodes` (sorted ids of b), keeping b's edge features.
model::NodeBatch sub_batch(const model::NodeBatch& b, const std::vector<std::size_t>& nodes);

// Probability of `cls` at local node `node` of b with the masks applied
// multiplicatively (edge coefficients and edge-feature rows; input features).
double retention(model::EgatModel& m, const model::NodeBatch& b, std::size_t node, int cls,
                 const std::vector<double>& edge_mask, const std::vector<double>& feature_mask);

// Optimises sigmoid-parameterised edge and feature masks with Adam on
// NLL(predicted class) + size * mean(mask) + entropy * mean binary
// entropy(mask), with separate weights for the edge and the feature mask.
// NumericalError when the objective becomes non-finite.
ExplanationResult explain_node(model::EgatModel& m, const model::NodeBatch& b, std::size_t node,
                               const ExplainConfig& cfg = {});

// Writes `<stem>.edges` (graph edge-list format with the weights) and
// `<stem>.nodes.csv` (node id followed by the given metadata columns).
struct NodeTable {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;  // one per node, aligned with columns
};
void export_embedding_inputs(const std::filesystem::path& stem, const graph::SparseGraph& g,
                             const std::vector<double>& weights, const NodeTable& meta);
// Reads back what export_embedding_inputs wrote.
std::pair<graph::SparseGraph, NodeTable> read_embedding_inputs(const std::filesystem::path& stem);

}  // namespace egat::interpret
