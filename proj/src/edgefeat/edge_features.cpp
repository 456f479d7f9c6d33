#include "egat/edgefeat/edge_features.hpp"

#include <cmath>
#include <numeric>

#include "egat/edgefeat/curvature.hpp"
#include "egat/errors.hpp"

namespace egat::edgefeat {

using numerics::Tensor;

ColumnRange block_columns(FeatureBlock b) {
  switch (b) {
    case FeatureBlock::cluster:
      return {0, 8};
    case FeatureBlock::batch:
      return {8, 16};
    case FeatureBlock::curvature:
      return {16, 17};
    case FeatureBlock::node2vec:
      return {17, 18};
  }
  throw InternalError("unknown feature block");
}

FeatureMask mask_of(std::initializer_list<FeatureBlock> blocks) {
  FeatureMask m;
  for (FeatureBlock b : blocks) {
    const ColumnRange r = block_columns(b);
    for (std::size_t c = r.begin; c < r.end; ++c) m.set(c);
  }
  return m;
}

std::string mask_name(const FeatureMask& m) {
  using B = FeatureBlock;
  static const std::vector<std::pair<FeatureMask, const char*>> rows = {
      {FeatureMask{}, "No edge features"},
      {mask_of({B::cluster}), "Cluster label"},
      {mask_of({B::batch}), "Batch label"},
      {mask_of({B::node2vec}), "node2vec"},
      {mask_of({B::curvature}), "Curvature"},
      {mask_of({B::cluster, B::batch}), "Cluster + batch label"},
      {mask_of({B::node2vec, B::curvature}), "node2vec + curvature"},
      {mask_of({B::cluster, B::batch, B::node2vec}), "Cluster + batch label + node2vec"},
      {mask_of({B::cluster, B::batch, B::curvature}), "Cluster + batch label + curvature"},
      {mask_of({B::cluster, B::curvature}), "Cluster + curvature"},
      {mask_of({B::cluster, B::node2vec}), "Cluster + node2vec"},
      {mask_of({B::batch, B::curvature}), "Batch label + curvature"},
      {mask_of({B::batch, B::node2vec}), "Batch label + node2vec"},
      {mask_of({B::cluster, B::curvature, B::node2vec}), "Cluster + curvature + node2vec"},
      {mask_of({B::batch, B::curvature, B::node2vec}), "Batch + curvature + node2vec"},
      {full_mask(), "All edge features"},
  };
  for (const auto& [mask, name] : rows)
    if (mask == m) return name;
  return "Columns " + m.to_string();
}

void apply_mask(Tensor& features, const FeatureMask& m) {
  if (features.rank() != 2 || features.cols() != kEdgeFeatureWidth) {
    throw ShapeError("feature mask expects an E x 18 table");
  }
  for (std::size_t e = 0; e < features.rows(); ++e)
    for (std::size_t c = 0; c < kEdgeFeatureWidth; ++c)
      if (!m.test(c)) features.at(e, c) = 0.0;
}

namespace {

std::pair<double, double> mean_sd(std::span<const double> v) {
  if (v.empty()) return {0.0, 1.0};
  const double n = static_cast<double>(v.size());
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / n);
  return {mean, sd > 0.0 ? sd : 1.0};
}

}  // namespace

ScalarStats fit_scalar_stats(std::span<const double> curvature, std::span<const double> node2vec) {
  ScalarStats s;
  std::tie(s.curvature_mean, s.curvature_sd) = mean_sd(curvature);
  std::tie(s.node2vec_mean, s.node2vec_sd) = mean_sd(node2vec);
  return s;
}

Tensor assemble_edge_features(const Tensor& aux_cluster, const Tensor& aux_batch, std::span<const double> curvature,
                              std::span<const double> node2vec, const ScalarStats& stats) {
  const std::size_t e_count = aux_cluster.rows();
  if (aux_cluster.cols() != 8 || aux_batch.cols() != 8) throw ShapeError("attention blocks must have 8 columns");
  if (aux_batch.rows() != e_count || curvature.size() != e_count || node2vec.size() != e_count) {
    throw InternalError("edge feature blocks are not aligned to the same edge list");
  }
  Tensor out = Tensor::matrix(e_count, kEdgeFeatureWidth);
  for (std::size_t e = 0; e < e_count; ++e) {
    for (std::size_t c = 0; c < 8; ++c) {
      out.at(e, c) = aux_cluster.at(e, c);
      out.at(e, 8 + c) = aux_batch.at(e, c);
    }
    out.at(e, 16) = (curvature[e] - stats.curvature_mean) / stats.curvature_sd;
    out.at(e, 17) = (node2vec[e] - stats.node2vec_mean) / stats.node2vec_sd;
  }
  return out;
}

std::vector<Tensor> build_edge_features(const std::vector<SplitGraph>& splits, std::span<const int> train_clusters,
                                        std::span<const int> train_batches, const EdgeFeatureConfig& cfg,
                                        EdgeFeatureReport* report) {
  if (splits.empty()) throw ConfigError("edge features: no graphs given");
  for (const SplitGraph& s : splits) {
    if (s.graph == nullptr || s.node_features == nullptr) throw ConfigError("edge features: incomplete split");
  }
  const SplitGraph& train = splits.front();
  AuxConfig aux_cfg = cfg.aux;
  AuxTrainResult cluster_model = train_auxiliary(*train.graph, *train.node_features, train_clusters, aux_cfg);
  aux_cfg.seed = cfg.aux.seed + 1;
  AuxTrainResult batch_model = train_auxiliary(*train.graph, *train.node_features, train_batches, aux_cfg);
  if (cluster_model.model.first_layer().heads() != 8) throw ConfigError("edge features need 8 attention heads");

  std::vector<std::vector<double>> curvature(splits.size()), n2v(splits.size());
  EdgeFeatureReport local;
  for (std::size_t s = 0; s < splits.size(); ++s) {
    const graph::SparseGraph& g = *splits[s].graph;
    double total = 0.0;
    std::size_t count = 0;
    for (std::size_t u = 0; u < g.n_nodes; ++u)
      for (std::size_t e = g.row_ptr[u]; e < g.row_ptr[u + 1]; ++e)
        if (g.col_idx[e] != u) {
          total += g.edge_weight[e];
          ++count;
        }
    const double mean_w = count > 0 && total > 0.0 ? total / static_cast<double>(count) : 1.0;
    curvature[s] = forman_ricci(clamp_weights(g, cfg.weight_floor_fraction * mean_w));
    Node2vecConfig n2v_cfg = cfg.node2vec;
    n2v_cfg.seed = cfg.node2vec.seed + s;
    const Node2vecResult emb = node2vec_embed(g, n2v_cfg);
    local.node2vec_singletons.push_back(emb.singletons.size());
    n2v[s] = node2vec_edge_score(emb.embedding, g);
  }
  local.stats = fit_scalar_stats(curvature[0], n2v[0]);

  std::vector<Tensor> out;
  for (std::size_t s = 0; s < splits.size(); ++s) {
    const Tensor c = edge_attention_features(cluster_model.model, *splits[s].graph, *splits[s].node_features);
    const Tensor b = edge_attention_features(batch_model.model, *splits[s].graph, *splits[s].node_features);
    const ScalarStats stats = cfg.per_graph_scalar_stats ? fit_scalar_stats(curvature[s], n2v[s]) : local.stats;
    out.push_back(assemble_edge_features(c, b, curvature[s], n2v[s], stats));
  }
  local.cluster_val_accuracy = cluster_model.val_accuracy;
  local.batch_val_accuracy = batch_model.val_accuracy;
  local.cluster_classes = cluster_model.model.n_classes();
  local.batch_classes = batch_model.model.n_classes();
  if (report != nullptr) *report = std::move(local);
  return out;
}

}  // namespace egat::edgefeat
