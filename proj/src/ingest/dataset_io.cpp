#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <unordered_map>

#include "egat/errors.hpp"
#include "egat/ingest/dataset.hpp"
#include "egat/text.hpp"

namespace egat::ingest {

namespace fs = std::filesystem;

namespace {

std::string at_line(const fs::path& p, std::size_t line) {
  return p.filename().string() + " line " + std::to_string(line) + ": ";
}

std::ifstream open_in(const fs::path& p) {
  std::ifstream is(p);
  if (!is) throw DataError("cannot open " + p.string());
  return is;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream os(p);
  if (!os) throw DataError("cannot open " + p.string() + " for writing");
  return os;
}

numerics::Tensor read_mtx(const fs::path& path) {
  auto is = open_in(path);
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(is, line)) throw DataError(at_line(path, 1) + "empty file");
  ++line_no;
  const std::string lowered = text::to_lower(line);
  const auto head = text::split_ws(lowered);
  if (head.size() < 4 || head[0] != "%%matrixmarket" || head[1] != "matrix" || head[2] != "coordinate") {
    throw DataError(at_line(path, 1) + "expected '%%MatrixMarket matrix coordinate <field> general'");
  }
  if (head[3] != "integer" && head[3] != "real") {
    throw DataError(at_line(path, 1) + "unsupported field type '" + std::string(head[3]) + "'");
  }
  if (head.size() >= 5 && head[4] != "general") {
    throw DataError(at_line(path, 1) + "only general symmetry is supported");
  }

  std::size_t rows = 0, cols = 0, nnz = 0;
  bool have_size = false;
  numerics::Tensor m;
  std::vector<bool> seen;
  std::size_t entries = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const auto t = text::trim(line);
    if (t.empty() || t.front() == '%') continue;
    const auto tok = text::split_ws(t);
    if (!have_size) {
      const auto r = tok.size() == 3 ? text::parse_size(tok[0]) : std::nullopt;
      const auto c = tok.size() == 3 ? text::parse_size(tok[1]) : std::nullopt;
      const auto z = tok.size() == 3 ? text::parse_size(tok[2]) : std::nullopt;
      if (!r || !c || !z) throw DataError(at_line(path, line_no) + "malformed size line, expected 'rows cols nnz'");
      rows = *r;
      cols = *c;
      nnz = *z;
      m = numerics::Tensor::matrix(rows, cols);
      seen.assign(rows * cols, false);
      have_size = true;
      continue;
    }
    if (tok.size() != 3) throw DataError(at_line(path, line_no) + "expected 'row col value'");
    const auto i = text::parse_size(tok[0]);
    const auto j = text::parse_size(tok[1]);
    const auto v = text::parse_double(tok[2]);
    if (!i || !j || !v) throw DataError(at_line(path, line_no) + "malformed entry");
    if (*i < 1 || *i > rows || *j < 1 || *j > cols) throw DataError(at_line(path, line_no) + "index out of range");
    if (*v < 0 || !std::isfinite(*v)) throw DataError(at_line(path, line_no) + "negative or non-finite count");
    const std::size_t idx = (*i - 1) * cols + (*j - 1);
    if (seen[idx]) throw DataError(at_line(path, line_no) + "duplicate entry");
    seen[idx] = true;
    m[idx] = *v;
    ++entries;
  }
  if (!have_size) throw DataError(path.filename().string() + ": missing size line");
  if (entries != nnz) {
    throw DataError(path.filename().string() + ": size line announces " + std::to_string(nnz) + " entries, found " +
                    std::to_string(entries));
  }
  return m;
}

numerics::Tensor read_dense_csv(const fs::path& path) {
  auto is = open_in(path);
  std::string line;
  std::size_t line_no = 0, cols = 0;
  std::vector<double> values;
  std::size_t rows = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    const auto fields = text::split_csv(line);
    if (!fields) throw DataError(at_line(path, line_no) + "unterminated quote");
    std::vector<double> row;
    bool numeric = true;
    for (const auto& f : *fields) {
      const auto v = text::parse_double(f);
      if (!v) {
        numeric = false;
        break;
      }
      row.push_back(*v);
    }
    if (!numeric) {
      if (rows == 0 && values.empty() && line_no == 1) continue;  // header row
      throw DataError(at_line(path, line_no) + "non-numeric value");
    }
    if (rows == 0) cols = row.size();
    if (row.size() != cols) {
      throw DataError(at_line(path, line_no) + "expected " + std::to_string(cols) + " values, found " +
                      std::to_string(row.size()));
    }
    for (double v : row) {
      if (v < 0 || !std::isfinite(v)) throw DataError(at_line(path, line_no) + "negative or non-finite count");
    }
    values.insert(values.end(), row.begin(), row.end());
    ++rows;
  }
  return numerics::Tensor({rows, cols}, std::move(values));
}

std::vector<std::string> read_genes(const fs::path& path) {
  auto is = open_in(path);
  std::vector<std::string> genes;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const auto t = text::trim(line);
    if (t.empty()) throw DataError(at_line(path, line_no) + "empty gene name");
    genes.emplace_back(t);
  }
  return genes;
}

struct MetaTable {
  std::vector<CellMeta> rows;
  std::vector<int> cluster;
};

MetaTable read_meta(const fs::path& path) {
  auto is = open_in(path);
  std::string line;
  if (!std::getline(is, line)) throw DataError(at_line(path, 1) + "missing header row");
  const auto header = text::split_csv(line);
  if (!header) throw DataError(at_line(path, 1) + "unterminated quote");
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header->size(); ++i) col[text::to_lower(text::trim((*header)[i]))] = i;
  for (const char* required : {"cell_id", "batch", "condition"}) {
    if (!col.count(required)) throw DataError(at_line(path, 1) + "missing column '" + required + "'");
  }
  auto find = [&](const char* name) { return col.count(name) ? col[name] : std::string::npos; };
  const std::size_t c_tp = find("timepoint"), c_vc = find("viral_count"), c_cl = find("cluster");

  MetaTable out;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    const auto f = text::split_csv(line);
    if (!f) throw DataError(at_line(path, line_no) + "unterminated quote");
    if (f->size() != header->size()) {
      throw DataError(at_line(path, line_no) + "expected " + std::to_string(header->size()) + " fields, found " +
                      std::to_string(f->size()));
    }
    CellMeta m;
    m.cell_id = (*f)[col["cell_id"]];
    m.batch = (*f)[col["batch"]];
    m.condition = (*f)[col["condition"]];
    if (m.batch.empty()) throw DataError(at_line(path, line_no) + "empty batch");
    if (c_tp != std::string::npos) m.timepoint = (*f)[c_tp];
    if (c_vc != std::string::npos && !text::trim((*f)[c_vc]).empty()) {
      const auto v = text::parse_double((*f)[c_vc]);
      if (!v || *v < 0) throw DataError(at_line(path, line_no) + "bad viral_count");
      m.viral_count = *v;
    }
    if (c_cl != std::string::npos) {
      const auto v = text::parse_int((*f)[c_cl]);
      if (!v) throw DataError(at_line(path, line_no) + "bad cluster");
      out.cluster.push_back(static_cast<int>(*v));
    }
    out.rows.push_back(std::move(m));
  }
  return out;
}

void read_labels(const fs::path& path, CellDataset& d) {
  auto is = open_in(path);
  std::string line;
  if (!std::getline(is, line)) throw DataError(at_line(path, 1) + "missing header row");
  std::size_t line_no = 1;
  std::map<int, std::string> names;
  while (std::getline(is, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    const auto f = text::split_csv(line);
    if (!f || f->size() != 3) throw DataError(at_line(path, line_no) + "expected 'cell_id,label,class'");
    const std::size_t cell = d.labels.size();
    if (cell >= d.meta.size() || (*f)[0] != d.meta[cell].cell_id) {
      throw DataError(at_line(path, line_no) + "cell ids do not follow meta.csv order");
    }
    const auto v = text::parse_int((*f)[1]);
    if (!v || *v < -1) throw DataError(at_line(path, line_no) + "bad label");
    const int label = static_cast<int>(*v);
    d.labels.push_back(label);
    if (label >= 0) {
      auto [it, inserted] = names.emplace(label, (*f)[2]);
      if (!inserted && it->second != (*f)[2]) throw DataError(at_line(path, line_no) + "inconsistent class name");
    }
  }
  if (d.labels.size() != d.meta.size()) throw DataError(path.filename().string() + ": row count differs from cells");
  const int n_classes = names.empty() ? 0 : names.rbegin()->first + 1;
  for (int c = 0; c < n_classes; ++c) {
    d.class_names.push_back(names.count(c) ? names[c] : "class" + std::to_string(c));
  }
}

}  // namespace

std::vector<std::string> CellDataset::batch_names() const {
  std::vector<std::string> names;
  std::set<std::string> seen;
  for (const auto& m : meta) {
    if (seen.insert(m.batch).second) names.push_back(m.batch);
  }
  return names;
}

std::vector<std::size_t> CellDataset::batch_ids() const {
  const auto names = batch_names();
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < names.size(); ++i) index[names[i]] = i;
  std::vector<std::size_t> ids;
  ids.reserve(meta.size());
  for (const auto& m : meta) ids.push_back(index[m.batch]);
  return ids;
}

void CellDataset::validate() const {
  if (counts.rank() != 2 && counts.size() != 0) throw DataError("dataset: counts must be a matrix");
  if (counts.size() != 0 && counts.cols() != gene_names.size()) {
    throw DataError("dataset: " + std::to_string(counts.cols()) + " matrix columns but " +
                    std::to_string(gene_names.size()) + " gene names");
  }
  if (meta.size() != counts.rows()) {
    throw DataError("dataset: " + std::to_string(counts.rows()) + " matrix rows but " + std::to_string(meta.size()) +
                    " metadata rows");
  }
  for (double v : counts.values()) {
    if (!(v >= 0) || !std::isfinite(v)) throw DataError("dataset: counts must be finite and non-negative");
  }
  if (!labels.empty()) {
    if (labels.size() != meta.size()) throw DataError("dataset: label count differs from cell count");
    for (int l : labels) {
      if (l < -1 || l >= static_cast<int>(class_names.size())) throw DataError("dataset: label out of range");
    }
  }
  if (!true_cluster.empty() && true_cluster.size() != meta.size()) {
    throw DataError("dataset: cluster count differs from cell count");
  }
}

CellDataset CellDataset::select_cells(const std::vector<std::size_t>& cells) const {
  CellDataset out;
  out.gene_names = gene_names;
  out.class_names = class_names;
  out.counts = numerics::Tensor::matrix(cells.size(), counts.cols());
  for (std::size_t r = 0; r < cells.size(); ++r) {
    if (cells[r] >= n_cells()) throw IndexError("select_cells: cell " + std::to_string(cells[r]) + " out of range");
    std::copy(counts.row(cells[r]).begin(), counts.row(cells[r]).end(), out.counts.row(r).begin());
    out.meta.push_back(meta[cells[r]]);
    if (!labels.empty()) out.labels.push_back(labels[cells[r]]);
    if (!true_cluster.empty()) out.true_cluster.push_back(true_cluster[cells[r]]);
  }
  return out;
}

void make_unique_names(std::vector<std::string>& names) {
  std::set<std::string> used(names.begin(), names.end());
  std::map<std::string, std::size_t> count;
  for (auto& n : names) {
    if (count[n]++ == 0) continue;
    std::string candidate;
    std::size_t k = count[n] - 1;
    do {
      candidate = n + "-" + std::to_string(k++);
    } while (used.count(candidate));
    used.insert(candidate);
    n = candidate;
  }
}

CellDataset load_dataset(const fs::path& matrix, const fs::path& genes, const fs::path& metadata) {
  CellDataset d;
  const auto ext = text::to_lower(matrix.extension().string());
  d.counts = ext == ".csv" ? read_dense_csv(matrix) : read_mtx(matrix);
  d.gene_names = read_genes(genes);
  make_unique_names(d.gene_names);
  auto meta = read_meta(metadata);
  d.meta = std::move(meta.rows);
  d.true_cluster = std::move(meta.cluster);
  if (d.counts.cols() != d.gene_names.size()) {
    throw DataError(genes.filename().string() + ": " + std::to_string(d.gene_names.size()) +
                    " genes listed but the matrix has " + std::to_string(d.counts.cols()) + " columns");
  }
  if (d.meta.size() != d.counts.rows()) {
    throw DataError(metadata.filename().string() + ": " + std::to_string(d.meta.size()) +
                    " metadata rows but the matrix has " + std::to_string(d.counts.rows()) + " cells");
  }
  d.validate();
  return d;
}

CellDataset load_dataset_dir(const fs::path& dir) {
  CellDataset d = load_dataset(dir / "counts.mtx", dir / "genes.txt", dir / "meta.csv");
  if (fs::exists(dir / "labels.csv")) read_labels(dir / "labels.csv", d);
  d.validate();
  return d;
}

void write_dataset_dir(const CellDataset& d, const fs::path& dir) {
  d.validate();
  fs::create_directories(dir);
  {
    auto os = open_out(dir / "counts.mtx");
    std::size_t nnz = 0;
    bool integral = true;
    for (double v : d.counts.values()) {
      if (v != 0) ++nnz;
      if (v != std::floor(v)) integral = false;
    }
    os << "%%MatrixMarket matrix coordinate " << (integral ? "integer" : "real") << " general\n";
    os << d.n_cells() << ' ' << d.counts.cols() << ' ' << nnz << '\n';
    for (std::size_t i = 0; i < d.n_cells(); ++i)
      for (std::size_t j = 0; j < d.counts.cols(); ++j)
        if (d.counts.at(i, j) != 0) os << i + 1 << ' ' << j + 1 << ' ' << text::format_double(d.counts.at(i, j)) << '\n';
  }
  {
    auto os = open_out(dir / "genes.txt");
    for (const auto& g : d.gene_names) os << g << '\n';
  }
  {
    auto os = open_out(dir / "meta.csv");
    os << "cell_id,batch,condition,timepoint,viral_count" << (d.true_cluster.empty() ? "" : ",cluster") << '\n';
    for (std::size_t i = 0; i < d.meta.size(); ++i) {
      const auto& m = d.meta[i];
      os << text::csv_field(m.cell_id) << ',' << text::csv_field(m.batch) << ',' << text::csv_field(m.condition) << ','
         << text::csv_field(m.timepoint) << ',' << (m.viral_count ? text::format_double(*m.viral_count) : "");
      if (!d.true_cluster.empty()) os << ',' << d.true_cluster[i];
      os << '\n';
    }
  }
  if (d.has_labels()) {
    auto os = open_out(dir / "labels.csv");
    os << "cell_id,label,class\n";
    for (std::size_t i = 0; i < d.meta.size(); ++i) {
      const int l = d.labels[i];
      os << text::csv_field(d.meta[i].cell_id) << ',' << l << ','
         << (l >= 0 ? text::csv_field(d.class_names[static_cast<std::size_t>(l)]) : "") << '\n';
    }
  } else if (fs::exists(dir / "labels.csv")) {
    fs::remove(dir / "labels.csv");
  }
}

}  // namespace egat::ingest
