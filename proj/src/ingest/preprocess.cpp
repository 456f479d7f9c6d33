#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <string>

#include "egat/errors.hpp"
#include "egat/ingest/dataset.hpp"
#include "egat/text.hpp"

namespace egat::ingest {

namespace {

// One gene pass followed by one cell pass.
CellDataset filter_once(const CellDataset& d, const FilterOptions& opt) {
  const std::size_t n = d.n_cells(), g = d.n_genes();
  std::vector<std::size_t> keep_genes;
  for (std::size_t j = 0; j < g; ++j) {
    std::size_t expressing = 0;
    for (std::size_t i = 0; i < n; ++i) expressing += d.counts.at(i, j) > 0 ? 1 : 0;
    if (expressing >= opt.min_cells_per_gene) keep_genes.push_back(j);
  }
  if (keep_genes.empty()) throw DataError("filter: every gene was removed");
  std::vector<std::size_t> keep_cells;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t expressed = 0;
    for (std::size_t j : keep_genes) expressed += d.counts.at(i, j) > 0 ? 1 : 0;
    if (expressed >= opt.min_genes_per_cell) keep_cells.push_back(i);
  }
  if (keep_cells.empty()) throw DataError("filter: every cell was removed");

  CellDataset out = d.select_cells(keep_cells);
  out.gene_names.clear();
  numerics::Tensor counts = numerics::Tensor::matrix(keep_cells.size(), keep_genes.size());
  for (std::size_t r = 0; r < keep_cells.size(); ++r)
    for (std::size_t c = 0; c < keep_genes.size(); ++c) counts.at(r, c) = d.counts.at(keep_cells[r], keep_genes[c]);
  for (std::size_t j : keep_genes) out.gene_names.push_back(d.gene_names[j]);
  out.counts = std::move(counts);
  return out;
}

}  // namespace

CellDataset filter_cells_and_genes(const CellDataset& d, const FilterOptions& opt) {
  d.validate();
  // Dropping cells can push a gene under its threshold and vice versa, so
  // repeat until nothing changes. Each round removes something or stops.
  CellDataset cur = filter_once(d, opt);
  for (;;) {
    const std::size_t n = cur.n_cells(), g = cur.n_genes();
    CellDataset next = filter_once(cur, opt);
    if (next.n_cells() == n && next.n_genes() == g) return cur;
    cur = std::move(next);
  }
}

CellDataset filter_and_normalize(const CellDataset& d, const FilterOptions& opt) {
  CellDataset out = filter_cells_and_genes(d, opt);
  const std::size_t n = out.n_cells(), g = out.n_genes();
  std::vector<double> library(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < g; ++j) library[i] += out.counts.at(i, j);
  std::vector<double> sorted = library;
  std::sort(sorted.begin(), sorted.end());
  const double target = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  for (std::size_t i = 0; i < n; ++i) {
    const double scale = library[i] > 0 ? target / library[i] : 0.0;
    for (std::size_t j = 0; j < g; ++j) out.counts.at(i, j) = std::sqrt(out.counts.at(i, j) * scale);
  }
  return out;
}

namespace {

std::string normalized(std::string_view s) { return text::to_lower(text::trim(s)); }

}  // namespace

CellDataset derive_labels_organoid(const CellDataset& d, double viral_threshold) {
  CellDataset out = d;
  out.class_names = {"Mock",           "1dpi-infected", "1dpi-bystander", "2dpi-infected",
                     "2dpi-bystander", "3dpi-infected", "3dpi-bystander"};
  out.labels.assign(d.n_cells(), -1);
  for (std::size_t i = 0; i < d.meta.size(); ++i) {
    const auto& m = d.meta[i];
    const std::string tp = normalized(m.timepoint);
    const std::string where = "cell " + m.cell_id + ": ";
    if (tp.empty()) throw DataError(where + "missing timepoint");
    if (tp == "mock") {
      out.labels[i] = 0;
      continue;
    }
    if (tp != "1dpi" && tp != "2dpi" && tp != "3dpi") throw DataError(where + "unknown timepoint '" + m.timepoint + "'");
    if (!m.viral_count) throw DataError(where + "missing viral_count");
    const int day = tp[0] - '0';
    out.labels[i] = 2 * day - 1 + (*m.viral_count > viral_threshold ? 0 : 1);
  }
  return out;
}

CellDataset derive_labels_patient(const CellDataset& d) {
  CellDataset out = d;
  out.class_names = {"healthy", "moderate", "severe"};
  out.labels.assign(d.n_cells(), -1);
  std::map<std::string, int> batch_label;
  for (std::size_t i = 0; i < d.meta.size(); ++i) {
    const auto& m = d.meta[i];
    const std::string sev = normalized(m.condition);
    int label = -1;
    if (sev == "healthy") label = 0;
    if (sev == "moderate") label = 1;
    if (sev == "severe") label = 2;
    if (label < 0) throw DataError("cell " + m.cell_id + ": unknown severity '" + m.condition + "'");
    auto [it, inserted] = batch_label.emplace(m.batch, label);
    if (!inserted && it->second != label) {
      throw DataError("sample '" + m.batch + "' mixes severities; cell " + m.cell_id + " disagrees");
    }
    out.labels[i] = label;
  }
  return out;
}

std::vector<std::size_t> SplitAssignment::cells(Split s) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < tag.size(); ++i)
    if (tag[i] == s) out.push_back(i);
  return out;
}

SplitAssignment split_70_15_15(const CellDataset& d, std::uint64_t seed) {
  if (!d.has_labels()) throw DataError("split: dataset has no labels");
  const std::size_t n = d.n_cells();
  const auto n_val = static_cast<std::size_t>(std::llround(0.15 * static_cast<double>(n)));
  const auto n_test = n_val;
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);
  SplitAssignment sa;
  sa.seed = seed;
  sa.tag.assign(n, Split::train);
  for (std::size_t r = 0; r < n_val && r < n; ++r) sa.tag[perm[r]] = Split::val;
  for (std::size_t r = n_val; r < n_val + n_test && r < n; ++r) sa.tag[perm[r]] = Split::test;

  const char* split_name[] = {"train", "val", "test"};
  std::set<int> present(d.labels.begin(), d.labels.end());
  present.erase(-1);
  for (int s = 0; s < 3; ++s) {
    std::set<int> in_split;
    for (std::size_t i = 0; i < n; ++i)
      if (static_cast<int>(sa.tag[i]) == s) in_split.insert(d.labels[i]);
    for (int c : present) {
      if (!in_split.count(c)) {
        sa.warnings.push_back(std::string(split_name[s]) + " split has no cell of class " +
                              d.class_names[static_cast<std::size_t>(c)]);
      }
    }
  }
  return sa;
}

}  // namespace egat::ingest
