#include "egat/harness/pipeline.hpp"

#include <algorithm>
#include <cmath>

#include "egat/errors.hpp"
#include "egat/graph/bbknn.hpp"

namespace egat::harness {

void column_stats(const numerics::Tensor& x, std::vector<double>& mean, std::vector<double>& sd) {
  const std::size_t n = x.rows(), d = x.cols();
  if (n == 0) throw DataError("column statistics of an empty matrix");
  mean.assign(d, 0.0);
  sd.assign(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) mean[j] += x.at(i, j);
  for (auto& m : mean) m /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      const double c = x.at(i, j) - mean[j];
      sd[j] += c * c;
    }
  for (auto& s : sd) {
    s = std::sqrt(s / static_cast<double>(n));
    if (s == 0.0) s = 1.0;
  }
}

numerics::Tensor standardize(const numerics::Tensor& x, const std::vector<double>& mean, const std::vector<double>& sd) {
  if (mean.size() != x.cols() || sd.size() != x.cols()) throw ShapeError("standardize: statistics width differs");
  numerics::Tensor out = numerics::Tensor::matrix(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) out.at(i, j) = (x.at(i, j) - mean[j]) / sd[j];
  return out;
}

namespace {

numerics::Tensor select_rows(const numerics::Tensor& x, const std::vector<std::size_t>& rows) {
  numerics::Tensor out = numerics::Tensor::matrix(rows.size(), x.cols());
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t j = 0; j < x.cols(); ++j) out.at(r, j) = x.at(rows[r], j);
  return out;
}

graph::SparseGraph split_graph(const numerics::Tensor& coords, const std::vector<std::size_t>& batches,
                               std::size_t k) {
  // BB-kNN wants contiguous batch ids with no empty batch.
  std::vector<std::size_t> present = batches;
  std::sort(present.begin(), present.end());
  present.erase(std::unique(present.begin(), present.end()), present.end());
  std::vector<std::size_t> local(batches.size());
  for (std::size_t i = 0; i < batches.size(); ++i) {
    local[i] = static_cast<std::size_t>(std::lower_bound(present.begin(), present.end(), batches[i]) - present.begin());
  }
  if (batches.size() < 2) return graph::with_self_loops(graph::SparseGraph::from_edges(batches.size(), {}), 0.0);
  return graph::with_self_loops(graph::build_bbknn(coords, local, present.size(), k), 0.0);
}

}  // namespace

PreparedData prepare_graphs(const ingest::CellDataset& raw, const TrainConfig& cfg) {
  cfg.validate();
  if (!raw.has_labels()) throw DataError("training data needs per-cell labels");
  PreparedData p;
  p.dataset = ingest::filter_and_normalize(raw, cfg.filter_options());
  const auto& d = p.dataset;
  if (d.n_cells() < 3 || d.n_genes() == 0) throw DataError("no cells or genes left after filtering");
  p.n_classes = d.class_names.size();
  if (p.n_classes < 2) throw DataError("at least two classes are needed");
  p.assignment = ingest::split_70_15_15(d, cfg.split_seed);
  const auto batch_of = d.batch_ids();

  const ingest::Split order[] = {ingest::Split::train, ingest::Split::val, ingest::Split::test};
  for (std::size_t s = 0; s < 3; ++s) {
    auto& sp = p.splits[s];
    sp.cells = p.assignment.cells(order[s]);
    if (sp.cells.empty()) throw DataError("a split has no cells; the dataset is too small");
    for (std::size_t c : sp.cells) {
      sp.labels.push_back(d.labels[c]);
      sp.batches.push_back(batch_of[c]);
    }
  }

  const numerics::Tensor train_x = select_rows(d.counts, p.splits[0].cells);
  column_stats(train_x, p.gene_mean, p.gene_sd);
  const std::size_t max_dims = std::min({cfg.pca_dims, train_x.rows() - 1, train_x.cols()});
  if (max_dims == 0) throw DataError("too few training cells for a PCA projection");
  for (std::size_t s = 0; s < 3; ++s) {
    auto& sp = p.splits[s];
    sp.features = s == 0 ? standardize(train_x, p.gene_mean, p.gene_sd)
                         : standardize(select_rows(d.counts, sp.cells), p.gene_mean, p.gene_sd);
    if (s == 0) {
      auto [model, projected] = graph::pca_fit_project(sp.features, max_dims);
      p.pca = std::move(model);
      sp.pca = std::move(projected);
    } else {
      sp.pca = p.pca.project(sp.features);
    }
    sp.graph = split_graph(sp.pca, sp.batches, cfg.knn_k);
    p.d_max = std::max(p.d_max, sp.graph.max_degree());
  }
  return p;
}

void attach_edge_features(PreparedData& p, const TrainConfig& cfg) {
  community::LouvainOptions lo;
  lo.resolution = cfg.louvain_resolution;
  lo.seed = cfg.feature_seed;
  p.clusters = community::louvain(graph::without_self_loops(p.splits[0].graph), lo);

  std::vector<int> clusters, batches;
  for (std::size_t c : p.clusters.partition.community) clusters.push_back(static_cast<int>(c));
  for (std::size_t b : p.splits[0].batches) batches.push_back(static_cast<int>(b));

  std::vector<edgefeat::SplitGraph> in;
  for (auto& sp : p.splits) in.push_back({&sp.graph, &sp.features});
  auto tables = edgefeat::build_edge_features(in, clusters, batches, cfg.edge_feature_config(), &p.edge_report);
  for (std::size_t s = 0; s < 3; ++s) p.splits[s].graph.edge_feat = std::move(tables[s]);
  p.has_edge_features = true;
}

PreparedData prepare(const ingest::CellDataset& raw, const TrainConfig& cfg) {
  PreparedData p = prepare_graphs(raw, cfg);
  attach_edge_features(p, cfg);
  return p;
}

SplitData with_feature_mask(const SplitData& s, const edgefeat::FeatureMask& mask) {
  SplitData out = s;
  if (out.graph.edge_feat.size() != 0) edgefeat::apply_mask(out.graph.edge_feat, mask);
  return out;
}

}  // namespace egat::harness
