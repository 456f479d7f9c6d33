#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "egat/numerics/tensor.hpp"

namespace egat::ingest {

struct CellMeta {
  std::string cell_id;
  std::string batch;
  std::string condition;
  std::string timepoint;  // empty when unknown
  std::optional<double> viral_count;
};

// Cells x genes expression matrix with aligned per-cell metadata. Labels,
// when present, index class_names; -1 marks an unlabelled cell.
struct CellDataset {
  numerics::Tensor counts;
  std::vector<std::string> gene_names;
  std::vector<CellMeta> meta;
  std::vector<int> labels;
  std::vector<std::string> class_names;
  std::vector<int> true_cluster;  // ground truth from the generator, else empty

  std::size_t n_cells() const noexcept { return counts.rows(); }
  std::size_t n_genes() const noexcept { return gene_names.size(); }
  bool has_labels() const noexcept { return !labels.empty(); }

  // Distinct batch names in order of first appearance, and each cell's index
  // into that list.
  std::vector<std::string> batch_names() const;
  std::vector<std::size_t> batch_ids() const;

  // Throws DataError when rows, metadata, names or labels disagree.
  void validate() const;
  // Keeps the listed cells, in the given order.
  CellDataset select_cells(const std::vector<std::size_t>& cells) const;
};

// Matrix Market coordinate file or dense CSV (cells x genes, optional header
// row), one gene name per line, and a metadata CSV whose header names the
// columns cell_id, batch, condition and optionally timepoint, viral_count,
// cluster. Duplicate gene names get "-1", "-2", ... suffixes.
CellDataset load_dataset(const std::filesystem::path& matrix, const std::filesystem::path& genes,
                         const std::filesystem::path& metadata);

// Reads {counts.mtx, genes.txt, meta.csv, labels.csv}; labels.csv is optional.
CellDataset load_dataset_dir(const std::filesystem::path& dir);
// Writes the same layout. labels.csv is written only for labelled datasets.
void write_dataset_dir(const CellDataset& d, const std::filesystem::path& dir);

// Disambiguates repeated names in place.
void make_unique_names(std::vector<std::string>& names);

struct FilterOptions {
  std::size_t min_cells_per_gene = 3;
  std::size_t min_genes_per_cell = 200;
};

// Gene filter and cell filter, repeated until neither removes anything.
// Expects raw counts.
CellDataset filter_cells_and_genes(const CellDataset& d, const FilterOptions& opt = {});
// Filtering followed by median library-size scaling and a square root.
CellDataset filter_and_normalize(const CellDataset& d, const FilterOptions& opt = {});

// Seven classes: Mock and {1,2,3}dpi x {infected, bystander}; infected means
// viral_count strictly above the threshold.
CellDataset derive_labels_organoid(const CellDataset& d, double viral_threshold = 10.0);
// Three classes from the condition column, case-insensitive: healthy,
// moderate, severe. Every cell of a batch must carry the same severity.
CellDataset derive_labels_patient(const CellDataset& d);

enum class Split : std::uint8_t { train, val, test };

struct SplitAssignment {
  std::vector<Split> tag;
  std::uint64_t seed = 0;
  std::vector<std::string> warnings;  // e.g. a split without any cell of a class

  std::vector<std::size_t> cells(Split s) const;
};

SplitAssignment split_70_15_15(const CellDataset& d, std::uint64_t seed);

struct SyntheticSpec {
  std::size_t n_cells = 3000;
  std::size_t n_genes = 200;
  std::size_t n_clusters = 6;
  std::size_t n_batches = 3;
  std::size_t n_classes = 3;
  double signal_strength = 1.0;
  double batch_effect = 1.0;
  std::uint64_t seed = 0;
  // shape of the planted structure
  std::size_t n_signal_genes = 5;
  double cluster_scale = 1.5;   // sd of cluster log-fold changes on marker genes
  double marker_fraction = 0.3;
  double mixing = 0.25;         // secondary-cluster weight of the most mixed class
  double cell_noise = 0.25;     // sd of per-cell log-rate jitter
  double mean_library = 1500.0;
};

// Cluster archetypes, class-specific signal genes (named "sig<j>"), additive
// per-batch log offsets and Poisson sampling. Class also sets how strongly a
// cell mixes its cluster with a second one, so neighbourhood composition
// carries class information. Labels are the classes; true_cluster is filled.
CellDataset generate_synthetic(const SyntheticSpec& spec);

}  // namespace egat::ingest
