#include "egat/graph/graph_io.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "egat/errors.hpp"
#include "egat/text.hpp"

namespace egat::graph {

void write_graph(std::ostream& os, const SparseGraph& g) {
  const std::size_t f = g.edge_feat_dim();
  os << "nodes=" << g.n_nodes << " edges=" << g.n_edges() << " efeat=" << f << '\n';
  std::string line;
  for (std::size_t u = 0; u < g.n_nodes; ++u) {
    for (std::size_t e = g.row_ptr[u]; e < g.row_ptr[u + 1]; ++e) {
      line = std::to_string(u) + ' ' + std::to_string(g.col_idx[e]) + ' ' + text::format_double(g.edge_weight[e]);
      for (std::size_t c = 0; c < f; ++c) line += ' ' + text::format_double(g.edge_feat.at(e, c));
      line += '\n';
      os << line;
    }
  }
}

void write_graph(const std::filesystem::path& path, const SparseGraph& g) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot open " + path.string() + " for writing");
  write_graph(os, g);
  if (!os) throw DataError("failed writing " + path.string());
}

namespace {

std::size_t header_field(std::string_view token, std::string_view key) {
  if (token.substr(0, key.size()) != key || token.size() <= key.size() || token[key.size()] != '=') {
    throw DataError("graph line 1: expected '" + std::string(key) + "=<count>'");
  }
  const auto v = text::parse_size(token.substr(key.size() + 1));
  if (!v) throw DataError("graph line 1: bad value for " + std::string(key));
  return *v;
}

}  // namespace

SparseGraph read_graph(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw DataError("graph: empty input");
  const auto head = text::split_ws(line);
  if (head.size() != 3) throw DataError("graph line 1: expected 'nodes=<n> edges=<m> efeat=<F>'");
  const std::size_t n = header_field(head[0], "nodes");
  const std::size_t m = header_field(head[1], "edges");
  const std::size_t f = header_field(head[2], "efeat");

  std::vector<Edge> edges;
  std::vector<double> feats;
  edges.reserve(m);
  feats.reserve(m * f);
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    const auto where = "graph line " + std::to_string(line_no) + ": ";
    const auto tok = text::split_ws(line);
    if (tok.size() != 3 + f) {
      throw DataError(where + "expected " + std::to_string(3 + f) + " fields, found " + std::to_string(tok.size()));
    }
    const auto src = text::parse_size(tok[0]);
    const auto dst = text::parse_size(tok[1]);
    const auto w = text::parse_double(tok[2]);
    if (!src || !dst || !w) throw DataError(where + "malformed edge");
    if (*src >= n || *dst >= n) throw DataError(where + "node id out of range");
    if (!edges.empty() && edges.back().src > *src) {
      throw DataError(where + "edges must be grouped by ascending source");
    }
    edges.push_back({*src, *dst, *w});
    for (std::size_t c = 0; c < f; ++c) {
      const auto x = text::parse_double(tok[3 + c]);
      if (!x) throw DataError(where + "malformed edge feature");
      feats.push_back(*x);
    }
  }
  if (edges.size() != m) {
    throw DataError("graph: header announces " + std::to_string(m) + " edges, found " + std::to_string(edges.size()));
  }

  // Preserve the file's within-row order rather than re-sorting.
  SparseGraph g;
  g.n_nodes = n;
  g.row_ptr.assign(n + 1, 0);
  for (const auto& e : edges) {
    ++g.row_ptr[e.src + 1];
    g.col_idx.push_back(e.dst);
    g.edge_weight.push_back(e.weight);
  }
  for (std::size_t u = 0; u < n; ++u) g.row_ptr[u + 1] += g.row_ptr[u];
  if (f) g.edge_feat = numerics::Tensor({m, f}, std::move(feats));
  g.validate();
  return g;
}

SparseGraph read_graph(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open " + path.string());
  return read_graph(is);
}

}  // namespace egat::graph
