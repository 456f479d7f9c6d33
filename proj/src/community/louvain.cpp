#include "egat/community/louvain.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <string>

#include "egat/errors.hpp"
#include "egat/text.hpp"

namespace egat::community {

namespace {

// Symmetric weighted adjacency. A self entry holds A_ii.
struct WeightedGraph {
  std::vector<std::vector<std::pair<std::size_t, double>>> adj;
  std::vector<double> strength;  // k_i = sum_j A_ij
  double total = 0.0;            // 2m = sum_ij A_ij
};

WeightedGraph from_sparse(const graph::SparseGraph& g, bool binary) {
  WeightedGraph w;
  w.adj.resize(g.n_nodes);
  w.strength.assign(g.n_nodes, 0.0);
  for (std::size_t u = 0; u < g.n_nodes; ++u) {
    for (std::size_t e = g.row_ptr[u]; e < g.row_ptr[u + 1]; ++e) {
      const double a = binary ? 1.0 : g.edge_weight[e];
      if (a < 0) throw DataError("modularity: negative edge weight");
      w.adj[u].push_back({g.col_idx[e], a});
      w.strength[u] += a;
      w.total += a;
    }
  }
  return w;
}

double modularity_of(const WeightedGraph& w, const std::vector<std::size_t>& comm, std::size_t n_comm, double gamma) {
  if (!(w.total > 0)) throw DataError("modularity: graph has zero total weight");
  double inside = 0.0;
  std::vector<double> tot(n_comm, 0.0);
  for (std::size_t u = 0; u < w.adj.size(); ++u) {
    tot[comm[u]] += w.strength[u];
    for (auto [v, a] : w.adj[u])
      if (comm[u] == comm[v]) inside += a;
  }
  double expected = 0.0;
  for (double t : tot) expected += t * t;
  return inside / w.total - gamma * expected / (w.total * w.total);
}

WeightedGraph aggregate(const WeightedGraph& w, const std::vector<std::size_t>& comm, std::size_t n_comm) {
  WeightedGraph out;
  std::vector<std::map<std::size_t, double>> acc(n_comm);
  out.strength.assign(n_comm, 0.0);
  for (std::size_t u = 0; u < w.adj.size(); ++u) {
    out.strength[comm[u]] += w.strength[u];
    for (auto [v, a] : w.adj[u]) acc[comm[u]][comm[v]] += a;
  }
  out.adj.resize(n_comm);
  for (std::size_t c = 0; c < n_comm; ++c) out.adj[c].assign(acc[c].begin(), acc[c].end());
  out.total = w.total;
  return out;
}

// Local-move phase. Returns true if any node changed community; `comm` is
// renumbered contiguously afterwards.
bool local_moves(const WeightedGraph& w, std::vector<std::size_t>& comm, std::size_t& n_comm, double gamma,
                 double tolerance, std::mt19937_64& rng) {
  const std::size_t n = w.adj.size();
  std::vector<double> tot(n, 0.0);
  for (std::size_t u = 0; u < n; ++u) tot[comm[u]] += w.strength[u];
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);

  // Gains are compared in units of A; a modularity gain dQ equals gain / m.
  const double m = w.total / 2.0;
  const double two_m = w.total;
  std::vector<double> link(n, 0.0);
  std::vector<std::size_t> touched;
  bool any = false;
  bool moved = true;
  while (moved) {
    moved = false;
    for (std::size_t u : order) {
      const std::size_t old = comm[u];
      const double ku = w.strength[u];
      touched.clear();
      for (auto [v, a] : w.adj[u]) {
        if (v == u) continue;
        if (link[comm[v]] == 0.0) touched.push_back(comm[v]);
        link[comm[v]] += a;
      }
      tot[old] -= ku;
      const double stay = link[old] - gamma * tot[old] * ku / two_m;
      std::size_t best = old;
      double best_gain = stay;
      for (std::size_t c : touched) {
        const double gain = link[c] - gamma * tot[c] * ku / two_m;
        if (gain > best_gain || (gain == best_gain && c < best && best != old)) {
          best = c;
          best_gain = gain;
        }
      }
      if (best != old && (best_gain - stay) / m <= tolerance) best = old;
      tot[best] += ku;
      if (best != old) {
        comm[u] = best;
        moved = true;
        any = true;
      }
      for (std::size_t c : touched) link[c] = 0.0;
      link[old] = 0.0;
    }
  }
  const Partition p = Partition::from_labels(comm);
  comm = p.community;
  n_comm = p.n_communities;
  return any;
}

}  // namespace

Partition Partition::from_labels(const std::vector<std::size_t>& labels) {
  Partition p;
  std::map<std::size_t, std::size_t> ids;
  p.community.reserve(labels.size());
  for (std::size_t l : labels) {
    auto [it, inserted] = ids.emplace(l, ids.size());
    p.community.push_back(it->second);
  }
  p.n_communities = ids.size();
  return p;
}

double modularity(const graph::SparseGraph& g, const Partition& p, double resolution, bool binary) {
  if (p.community.size() != g.n_nodes) throw ShapeError("modularity: partition size differs from node count");
  return modularity_of(from_sparse(g, binary), p.community, p.n_communities, resolution);
}

LouvainResult louvain(const graph::SparseGraph& g, const LouvainOptions& opt) {
  WeightedGraph w = from_sparse(g, opt.binary);
  if (!(w.total > 0)) throw DataError("louvain: graph has zero total weight");
  std::mt19937_64 rng(opt.seed);
  LouvainResult result;
  std::vector<std::size_t> node_comm(g.n_nodes);
  std::iota(node_comm.begin(), node_comm.end(), 0);
  double previous = modularity_of(w, node_comm, g.n_nodes, opt.resolution);

  while (true) {
    std::vector<std::size_t> comm(w.adj.size());
    std::iota(comm.begin(), comm.end(), 0);
    std::size_t n_comm = comm.size();
    if (!local_moves(w, comm, n_comm, opt.resolution, opt.tolerance, rng)) break;
    for (auto& c : node_comm) c = comm[c];
    w = aggregate(w, comm, n_comm);
    std::vector<std::size_t> identity(n_comm);
    std::iota(identity.begin(), identity.end(), 0);
    const double q = modularity_of(w, identity, n_comm, opt.resolution);
    if (q < previous - 1e-12) {
      throw InternalError("louvain: modularity decreased from " + std::to_string(previous) + " to " +
                          std::to_string(q));
    }
    result.modularity_per_pass.push_back(q);
    previous = q;
    if (n_comm == 1) break;
  }
  result.partition = Partition::from_labels(node_comm);
  return result;
}

void write_partition_csv(const std::filesystem::path& path, const Partition& p) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot open " + path.string() + " for writing");
  os << "node_id,community\n";
  for (std::size_t u = 0; u < p.community.size(); ++u) os << u << ',' << p.community[u] << '\n';
}

Partition read_partition_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open " + path.string());
  std::string line;
  std::getline(is, line);
  if (text::trim(line) != "node_id,community") throw DataError(path.filename().string() + " line 1: bad header");
  std::vector<std::size_t> labels;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    const auto f = text::split(text::trim(line), ',');
    const auto id = f.size() == 2 ? text::parse_size(f[0]) : std::nullopt;
    const auto c = f.size() == 2 ? text::parse_size(f[1]) : std::nullopt;
    if (!id || !c || *id != labels.size()) {
      throw DataError(path.filename().string() + " line " + std::to_string(line_no) + ": expected '<node_id>,<community>' in node order");
    }
    labels.push_back(*c);
  }
  Partition p;
  p.n_communities = Partition::from_labels(labels).n_communities;
  if (!labels.empty() && *std::max_element(labels.begin(), labels.end()) + 1 != p.n_communities) {
    throw DataError(path.filename().string() + ": community ids are not contiguous");
  }
  p.community = std::move(labels);
  return p;
}

}  // namespace egat::community
