#include "egat/graph/sparse_graph.hpp"

#include <algorithm>
#include <string>

#include "egat/errors.hpp"

namespace egat::graph {

std::size_t SparseGraph::find_edge(std::size_t u, std::size_t v) const {
  for (std::size_t e = row_ptr[u]; e < row_ptr[u + 1]; ++e) {
    if (col_idx[e] == v) return e;
  }
  return npos;
}

std::size_t SparseGraph::max_degree() const {
  std::size_t m = 0;
  for (std::size_t u = 0; u < n_nodes; ++u) m = std::max(m, degree(u));
  return m;
}

std::vector<std::size_t> SparseGraph::edge_sources() const {
  std::vector<std::size_t> src(n_edges());
  for (std::size_t u = 0; u < n_nodes; ++u)
    for (std::size_t e = row_ptr[u]; e < row_ptr[u + 1]; ++e) src[e] = u;
  return src;
}

void SparseGraph::validate() const {
  if (row_ptr.size() != n_nodes + 1 || row_ptr.front() != 0) throw DataError("graph: row_ptr has the wrong length");
  for (std::size_t u = 0; u < n_nodes; ++u) {
    if (row_ptr[u + 1] < row_ptr[u]) throw DataError("graph: row_ptr decreases at node " + std::to_string(u));
  }
  if (row_ptr.back() != col_idx.size() || edge_weight.size() != col_idx.size()) {
    throw DataError("graph: edge arrays disagree with row_ptr");
  }
  if (edge_feat.size() != 0 && edge_feat.rows() != col_idx.size()) {
    throw DataError("graph: edge feature rows disagree with edge count");
  }
  for (std::size_t u = 0; u < n_nodes; ++u) {
    std::vector<std::size_t> row(col_idx.begin() + static_cast<std::ptrdiff_t>(row_ptr[u]),
                                 col_idx.begin() + static_cast<std::ptrdiff_t>(row_ptr[u + 1]));
    for (std::size_t v : row) {
      if (v >= n_nodes) throw DataError("graph: neighbour id out of range at node " + std::to_string(u));
    }
    std::sort(row.begin(), row.end());
    if (std::adjacent_find(row.begin(), row.end()) != row.end()) {
      throw DataError("graph: duplicate edge at node " + std::to_string(u));
    }
  }
}

SparseGraph SparseGraph::from_edges(std::size_t n_nodes, std::vector<Edge> edges) {
  for (const auto& e : edges) {
    if (e.src >= n_nodes || e.dst >= n_nodes) throw IndexError("graph: edge endpoint out of range");
  }
  std::stable_sort(edges.begin(), edges.end(),
                   [](const Edge& a, const Edge& b) { return a.src < b.src || (a.src == b.src && a.dst < b.dst); });
  SparseGraph g;
  g.n_nodes = n_nodes;
  g.row_ptr.assign(n_nodes + 1, 0);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    if (i > 0 && edges[i].src == edges[i - 1].src && edges[i].dst == edges[i - 1].dst) {
      throw DataError("graph: duplicate edge (" + std::to_string(edges[i].src) + ", " + std::to_string(edges[i].dst) +
                      ")");
    }
    ++g.row_ptr[edges[i].src + 1];
    g.col_idx.push_back(edges[i].dst);
    g.edge_weight.push_back(edges[i].weight);
  }
  for (std::size_t u = 0; u < n_nodes; ++u) g.row_ptr[u + 1] += g.row_ptr[u];
  return g;
}

SparseGraph symmetrize(const SparseGraph& g) {
  std::vector<Edge> all;
  all.reserve(2 * g.n_edges());
  for (std::size_t u = 0; u < g.n_nodes; ++u) {
    for (std::size_t e = g.row_ptr[u]; e < g.row_ptr[u + 1]; ++e) {
      all.push_back({u, g.col_idx[e], g.edge_weight[e]});
      all.push_back({g.col_idx[e], u, g.edge_weight[e]});
    }
  }
  std::sort(all.begin(), all.end(), [](const Edge& a, const Edge& b) {
    if (a.src != b.src) return a.src < b.src;
    if (a.dst != b.dst) return a.dst < b.dst;
    return a.weight < b.weight;
  });
  std::vector<Edge> uniq;
  for (const auto& e : all) {
    if (!uniq.empty() && uniq.back().src == e.src && uniq.back().dst == e.dst) continue;
    uniq.push_back(e);
  }
  return SparseGraph::from_edges(g.n_nodes, std::move(uniq));
}

bool is_symmetric(const SparseGraph& g) {
  for (std::size_t u = 0; u < g.n_nodes; ++u) {
    for (std::size_t e = g.row_ptr[u]; e < g.row_ptr[u + 1]; ++e) {
      const std::size_t back = g.find_edge(g.col_idx[e], u);
      if (back == npos || g.edge_weight[back] != g.edge_weight[e]) return false;
    }
  }
  return true;
}

SparseGraph with_self_loops(const SparseGraph& g, double self_weight) {
  SparseGraph out;
  out.n_nodes = g.n_nodes;
  const std::size_t f = g.edge_feat_dim();
  std::vector<double> feats;
  for (std::size_t u = 0; u < g.n_nodes; ++u) {
    bool has_self = g.find_edge(u, u) != npos;
    bool placed = has_self;
    for (std::size_t e = g.row_ptr[u]; e < g.row_ptr[u + 1]; ++e) {
      // keep rows ordered by neighbour id when the input is
      if (!placed && g.col_idx[e] > u) {
        out.col_idx.push_back(u);
        out.edge_weight.push_back(self_weight);
        feats.insert(feats.end(), f, 0.0);
        placed = true;
      }
      out.col_idx.push_back(g.col_idx[e]);
      out.edge_weight.push_back(g.edge_weight[e]);
      if (f) feats.insert(feats.end(), g.edge_feat.row(e).begin(), g.edge_feat.row(e).end());
    }
    if (!placed) {
      out.col_idx.push_back(u);
      out.edge_weight.push_back(self_weight);
      feats.insert(feats.end(), f, 0.0);
    }
    out.row_ptr.push_back(out.col_idx.size());
  }
  if (f) out.edge_feat = numerics::Tensor({out.n_edges(), f}, std::move(feats));
  return out;
}

SparseGraph without_self_loops(const SparseGraph& g) {
  SparseGraph out;
  out.n_nodes = g.n_nodes;
  const std::size_t f = g.edge_feat_dim();
  std::vector<double> feats;
  for (std::size_t u = 0; u < g.n_nodes; ++u) {
    for (std::size_t e = g.row_ptr[u]; e < g.row_ptr[u + 1]; ++e) {
      if (g.col_idx[e] == u) continue;
      out.col_idx.push_back(g.col_idx[e]);
      out.edge_weight.push_back(g.edge_weight[e]);
      if (f) feats.insert(feats.end(), g.edge_feat.row(e).begin(), g.edge_feat.row(e).end());
    }
    out.row_ptr.push_back(out.col_idx.size());
  }
  if (f) out.edge_feat = numerics::Tensor({out.n_edges(), f}, std::move(feats));
  return out;
}

Subgraph induced_subgraph(const SparseGraph& g, std::span<const std::size_t> nodes) {
  Subgraph sub;
  sub.old_to_new.assign(g.n_nodes, npos);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i] >= g.n_nodes) throw IndexError("induced_subgraph: node id " + std::to_string(nodes[i]) + " invalid");
    if (sub.old_to_new[nodes[i]] != npos) {
      throw IndexError("induced_subgraph: node id " + std::to_string(nodes[i]) + " repeated");
    }
    sub.old_to_new[nodes[i]] = i;
  }
  sub.new_to_old.assign(nodes.begin(), nodes.end());
  SparseGraph& out = sub.graph;
  out.n_nodes = nodes.size();
  const std::size_t f = g.edge_feat_dim();
  std::vector<double> feats;
  for (std::size_t old_u : nodes) {
    for (std::size_t e = g.row_ptr[old_u]; e < g.row_ptr[old_u + 1]; ++e) {
      const std::size_t nv = sub.old_to_new[g.col_idx[e]];
      if (nv == npos) continue;
      out.col_idx.push_back(nv);
      out.edge_weight.push_back(g.edge_weight[e]);
      sub.edge_origin.push_back(e);
      if (f) feats.insert(feats.end(), g.edge_feat.row(e).begin(), g.edge_feat.row(e).end());
    }
    out.row_ptr.push_back(out.col_idx.size());
  }
  if (f) out.edge_feat = numerics::Tensor({out.n_edges(), f}, std::move(feats));
  return sub;
}

}  // namespace egat::graph
