#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>

#include "egat/edgefeat/edge_features.hpp"
#include "egat/ingest/dataset.hpp"
#include "egat/model/egat_model.hpp"

namespace egat::harness {

// Every tunable of the pipeline, read from and written to canonical
// `key = value` text. Unknown keys are rejected.
struct TrainConfig {
  // optimisation
  std::size_t epochs = 1000;
  std::size_t early_stop_patience = 100;
  std::size_t batch_nodes = 256;  // nodes per optimizer step, reached by grouping parts
  std::size_t partitions = 0;     // 0: about part_size nodes per part
  std::size_t part_size = 64;
  double lr = 0.01;
  double weight_decay = 0.0005;
  double dropout = 0.5;
  double leaky_slope = 0.2;
  // architecture
  std::size_t gat_layers = 2;
  std::size_t gat_hidden = 8;
  std::size_t gat_heads = 8;
  std::size_t gcn_hidden = 64;
  std::size_t set_in = 18;
  std::size_t set_out = 8;
  std::size_t set_heads = 2;
  std::size_t set_blocks = 1;
  model::EncoderKind encoder = model::EncoderKind::set_transformer;
  model::Backbone backbone = model::Backbone::gat;
  bool use_edge_features = true;
  bool averaged_aggregation = false;
  bool freeze_lambda = false;
  edgefeat::FeatureMask feature_mask = edgefeat::full_mask();
  // trials
  std::uint64_t seed = 0;  // first trial seed; trials use seed, seed+1, ...
  std::size_t seeds = 6;
  // data preparation
  std::uint64_t split_seed = 0;
  std::size_t min_cells_per_gene = 3;
  std::size_t min_genes_per_cell = 200;
  std::size_t pca_dims = 50;
  std::size_t knn_k = 3;
  double louvain_resolution = 1.0;
  std::uint64_t feature_seed = 0;  // auxiliary models, node2vec, Louvain
  edgefeat::AuxConfig aux;
  edgefeat::Node2vecConfig node2vec;
  double curvature_weight_floor = 1e-6;
  bool per_graph_scalar_stats = true;  // see EdgeFeatureConfig

  // ConfigError on a non-positive size or rate, patience > epochs, or an
  // unsupported architecture.
  void validate() const;
  std::string to_text() const;
  static TrainConfig from_text(std::string_view text, std::string_view source = "configuration");
  static TrainConfig load(const std::filesystem::path& path);

  ingest::FilterOptions filter_options() const { return {min_cells_per_gene, min_genes_per_cell}; }
  edgefeat::EdgeFeatureConfig edge_feature_config() const;
  model::ModelConfig model_config(std::size_t in_dim, std::size_t n_classes, std::size_t d_max,
                                  std::uint64_t trial_seed) const;
};

// Feature mask as 18 characters '0'/'1', column 0 first.
std::string mask_to_string(const edgefeat::FeatureMask& m);
edgefeat::FeatureMask mask_from_string(std::string_view s);

}  // namespace egat::harness
