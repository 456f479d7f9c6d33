#include "egat/graph/partition.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <random>
#include <string>

#include "egat/errors.hpp"

namespace egat::graph {

namespace {

// Undirected weighted adjacency between (super-)nodes, no self entries.
using Adjacency = std::vector<std::vector<std::pair<std::size_t, double>>>;

Adjacency binary_adjacency(const SparseGraph& g) {
  std::vector<std::vector<std::size_t>> nb(g.n_nodes);
  for (std::size_t u = 0; u < g.n_nodes; ++u) {
    for (std::size_t v : g.neighbors(u)) {
      if (v == u) continue;
      nb[u].push_back(v);
      nb[v].push_back(u);
    }
  }
  Adjacency adj(g.n_nodes);
  for (std::size_t u = 0; u < g.n_nodes; ++u) {
    std::sort(nb[u].begin(), nb[u].end());
    nb[u].erase(std::unique(nb[u].begin(), nb[u].end()), nb[u].end());
    for (std::size_t v : nb[u]) adj[u].push_back({v, 1.0});
  }
  return adj;
}

struct Level {
  Adjacency adj;
  std::vector<std::size_t> size;
};

// One round of heavy-edge matching. Returns the fine -> coarse map, or an
// empty vector when no pair could be merged.
std::vector<std::size_t> match_round(const Level& lvl, std::size_t cap, std::mt19937_64& rng, Level& coarse) {
  const std::size_t nc = lvl.size.size();
  std::vector<std::size_t> order(nc);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::size_t> mate(nc, npos);
  bool merged = false;
  for (std::size_t u : order) {
    if (mate[u] != npos) continue;
    std::size_t best = npos;
    double best_w = 0.0;
    for (auto [v, w] : lvl.adj[u]) {
      if (mate[v] != npos || lvl.size[u] + lvl.size[v] > cap) continue;
      if (best == npos || w > best_w || (w == best_w && lvl.size[v] < lvl.size[best])) {
        best = v;
        best_w = w;
      }
    }
    mate[u] = best == npos ? u : best;
    if (best != npos) {
      mate[best] = u;
      merged = true;
    }
  }
  if (!merged) return {};

  std::vector<std::size_t> map(nc, npos);
  std::size_t next = 0;
  for (std::size_t u = 0; u < nc; ++u) {
    if (map[u] != npos) continue;
    map[u] = next;
    map[mate[u]] = next;
    ++next;
  }
  coarse.size.assign(next, 0);
  std::vector<std::map<std::size_t, double>> acc(next);
  for (std::size_t u = 0; u < nc; ++u) {
    coarse.size[map[u]] += lvl.size[u];
    for (auto [v, w] : lvl.adj[u]) {
      if (map[u] != map[v]) acc[map[u]][map[v]] += w;
    }
  }
  coarse.adj.assign(next, {});
  for (std::size_t c = 0; c < next; ++c) coarse.adj[c].assign(acc[c].begin(), acc[c].end());
  return map;
}

}  // namespace

std::vector<std::vector<std::size_t>> PartitionMap::members() const {
  std::vector<std::vector<std::size_t>> out(n_parts);
  for (std::size_t u = 0; u < part.size(); ++u) out[part[u]].push_back(u);
  return out;
}

std::vector<std::size_t> PartitionMap::sizes() const {
  std::vector<std::size_t> out(n_parts, 0);
  for (std::size_t p : part) ++out[p];
  return out;
}

std::size_t partition_size_bound(std::size_t n_nodes, std::size_t parts) {
  // ceil(13 n / (10 P)) in integers
  return (13 * n_nodes + 10 * parts - 1) / (10 * parts);
}

PartitionMap partition_graph(const SparseGraph& g, std::size_t parts, std::uint64_t seed) {
  const std::size_t n = g.n_nodes;
  if (parts < 1 || parts > n) {
    throw ConfigError("partition: part count " + std::to_string(parts) + " outside [1, " + std::to_string(n) + "]");
  }
  PartitionMap pm{std::vector<std::size_t>(n, 0), parts};
  if (parts == 1) return pm;

  const std::size_t bound = partition_size_bound(n, parts);
  const std::size_t cap = std::max<std::size_t>(1, (bound + 1) / 2);
  std::mt19937_64 rng(seed);

  // Coarsening.
  std::vector<Level> levels(1);
  levels[0].adj = binary_adjacency(g);
  levels[0].size.assign(n, 1);
  std::vector<std::vector<std::size_t>> maps;
  while (levels.back().size.size() > 2 * parts) {
    Level coarse;
    auto map = match_round(levels.back(), cap, rng, coarse);
    if (map.empty()) break;
    maps.push_back(std::move(map));
    levels.push_back(std::move(coarse));
  }

  // Greedy assignment of the coarsest super-nodes, largest first.
  const Level& top = levels.back();
  const std::size_t nc = top.size.size();
  std::vector<std::size_t> order(nc);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return top.size[a] > top.size[b]; });
  std::vector<std::size_t> assign(nc, npos), load(parts, 0);
  std::size_t empty_parts = parts;
  for (std::size_t idx = 0; idx < nc; ++idx) {
    const std::size_t s = order[idx];
    std::vector<double> score(parts, 0.0);
    for (auto [v, w] : top.adj[s]) {
      if (assign[v] != npos) score[assign[v]] += w;
    }
    const bool must_fill = nc - idx <= empty_parts;
    std::size_t best = npos;
    for (std::size_t p = 0; p < parts; ++p) {
      if (must_fill && load[p] != 0) continue;
      if (!must_fill && load[p] + top.size[s] > bound) continue;
      if (best == npos || score[p] > score[best] || (score[p] == score[best] && load[p] < load[best])) best = p;
    }
    if (best == npos) best = static_cast<std::size_t>(std::min_element(load.begin(), load.end()) - load.begin());
    if (load[best] == 0) --empty_parts;
    assign[s] = best;
    load[best] += top.size[s];
  }

  // Project back to the original nodes.
  for (std::size_t u = 0; u < n; ++u) {
    std::size_t c = u;
    for (const auto& map : maps) c = map[c];
    pm.part[u] = assign[c];
  }

  const Adjacency& adj = levels[0].adj;
  auto connections = [&](std::size_t u) {
    std::vector<std::size_t> conn(parts, 0);
    for (auto [v, w] : adj[u]) ++conn[pm.part[v]];
    return conn;
  };
  std::fill(load.begin(), load.end(), 0);
  for (std::size_t p : pm.part) ++load[p];

  // Repair: fill empty parts and drain overfull ones, moving the nodes least
  // attached to their current part.
  auto move_one = [&](std::size_t from, std::size_t to) {
    std::size_t pick = npos, pick_inside = 0;
    for (std::size_t u = 0; u < n; ++u) {
      if (pm.part[u] != from) continue;
      const std::size_t inside = connections(u)[from];
      if (pick == npos || inside < pick_inside) {
        pick = u;
        pick_inside = inside;
      }
    }
    pm.part[pick] = to;
    --load[from];
    ++load[to];
  };
  for (std::size_t p = 0; p < parts; ++p) {
    if (load[p] == 0) move_one(static_cast<std::size_t>(std::max_element(load.begin(), load.end()) - load.begin()), p);
  }
  for (std::size_t p = 0; p < parts; ++p) {
    while (load[p] > bound) move_one(p, static_cast<std::size_t>(std::min_element(load.begin(), load.end()) - load.begin()));
  }

  // One refinement pass over the nodes in random order.
  std::vector<std::size_t> visit(n);
  std::iota(visit.begin(), visit.end(), 0);
  std::shuffle(visit.begin(), visit.end(), rng);
  for (std::size_t u : visit) {
    const std::size_t a = pm.part[u];
    if (load[a] <= 1) continue;
    const auto conn = connections(u);
    std::size_t best = npos;
    for (std::size_t p = 0; p < parts; ++p) {
      if (p == a || load[p] + 1 > bound) continue;
      if (best == npos || conn[p] > conn[best]) best = p;
    }
    if (best != npos && conn[best] > conn[a]) {
      pm.part[u] = best;
      --load[a];
      ++load[best];
    }
  }
  return pm;
}

PartitionMap random_balanced_partition(std::size_t n_nodes, std::size_t parts, std::uint64_t seed) {
  if (parts < 1 || parts > n_nodes) throw ConfigError("partition: part count out of range");
  std::vector<std::size_t> perm(n_nodes);
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);
  PartitionMap pm{std::vector<std::size_t>(n_nodes), parts};
  for (std::size_t i = 0; i < n_nodes; ++i) pm.part[perm[i]] = i % parts;
  return pm;
}

std::size_t edge_cut(const SparseGraph& g, const PartitionMap& pm) {
  std::size_t cut = 0;
  const Adjacency adj = binary_adjacency(g);
  for (std::size_t u = 0; u < g.n_nodes; ++u) {
    for (auto [v, w] : adj[u]) {
      if (u < v && pm.part[u] != pm.part[v]) ++cut;
    }
  }
  return cut;
}

}  // namespace egat::graph
