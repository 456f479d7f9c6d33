#include "egat/edgefeat/node2vec.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "egat/errors.hpp"

namespace egat::edgefeat {

void Node2vecConfig::validate() const {
  if (dims == 0 || walks_per_node == 0 || walk_length == 0 || window == 0 || negatives == 0 || epochs == 0) {
    throw ConfigError("node2vec: dims, walks, walk length, window, negatives and epochs must be positive");
  }
  if (!(p > 0.0) || !(q > 0.0) || !(learning_rate > 0.0)) {
    throw ConfigError("node2vec: p, q and the learning rate must be positive");
  }
}

namespace {

// Neighbour lists without self-loops, kept sorted for membership tests.
std::vector<std::vector<std::size_t>> plain_adjacency(const graph::SparseGraph& g) {
  std::vector<std::vector<std::size_t>> adj(g.n_nodes);
  for (std::size_t u = 0; u < g.n_nodes; ++u) {
    for (std::size_t e = g.row_ptr[u]; e < g.row_ptr[u + 1]; ++e)
      if (g.col_idx[e] != u) adj[u].push_back(g.col_idx[e]);
    std::sort(adj[u].begin(), adj[u].end());
  }
  return adj;
}

std::vector<std::size_t> one_walk(const std::vector<std::vector<std::size_t>>& adj, std::size_t start,
                                  const Node2vecConfig& cfg, std::mt19937_64& rng) {
  std::vector<std::size_t> walk{start};
  if (adj[start].empty()) return walk;
  walk.reserve(cfg.walk_length);
  const bool uniform = cfg.p == 1.0 && cfg.q == 1.0;
  std::vector<double> bias;
  while (walk.size() < cfg.walk_length) {
    const std::size_t cur = walk.back();
    const auto& nb = adj[cur];
    if (walk.size() == 1 || uniform) {
      walk.push_back(nb[std::uniform_int_distribution<std::size_t>(0, nb.size() - 1)(rng)]);
      continue;
    }
    const std::size_t prev = walk[walk.size() - 2];
    const auto& prev_nb = adj[prev];
    bias.resize(nb.size());
    double total = 0.0;
    for (std::size_t i = 0; i < nb.size(); ++i) {
      const std::size_t x = nb[i];
      if (x == prev) {
        bias[i] = 1.0 / cfg.p;
      } else if (std::binary_search(prev_nb.begin(), prev_nb.end(), x)) {
        bias[i] = 1.0;
      } else {
        bias[i] = 1.0 / cfg.q;
      }
      total += bias[i];
    }
    double r = std::uniform_real_distribution<double>(0.0, total)(rng);
    std::size_t pick = nb.size() - 1;
    for (std::size_t i = 0; i < nb.size(); ++i) {
      if (r < bias[i]) {
        pick = i;
        break;
      }
      r -= bias[i];
    }
    walk.push_back(nb[pick]);
  }
  return walk;
}

}  // namespace

std::vector<std::vector<std::size_t>> node2vec_walks(const graph::SparseGraph& g, const Node2vecConfig& cfg) {
  cfg.validate();
  const auto adj = plain_adjacency(g);
  const std::size_t n = g.n_nodes;
  std::vector<std::vector<std::size_t>> walks(cfg.walks_per_node * n);
  // Each walk draws from its own stream keyed by (seed, round, start), so the
  // corpus does not depend on the thread count.
#pragma omp parallel for schedule(dynamic, 64)
  for (long idx = 0; idx < static_cast<long>(walks.size()); ++idx) {
    const auto i = static_cast<std::size_t>(idx);
    std::seed_seq seq{static_cast<std::uint64_t>(cfg.seed), static_cast<std::uint64_t>(i / n),
                      static_cast<std::uint64_t>(i % n)};
    std::mt19937_64 rng(seq);
    walks[i] = one_walk(adj, i % n, cfg, rng);
  }
  return walks;
}

Node2vecResult node2vec_embed(const graph::SparseGraph& g, const Node2vecConfig& cfg) {
  const auto walks = node2vec_walks(g, cfg);
  const std::size_t n = g.n_nodes, d = cfg.dims;
  std::mt19937_64 rng(cfg.seed ^ 0x6e326576ULL);

  Node2vecResult result;
  result.embedding = numerics::Tensor::matrix(n, d);
  auto& in = result.embedding.values();
  std::uniform_real_distribution<double> init(-0.5 / static_cast<double>(d), 0.5 / static_cast<double>(d));
  for (double& v : in) v = init(rng);
  std::vector<double> out(n * d, 0.0);
  for (std::size_t u = 0; u < n; ++u)
    if (g.row_ptr[u + 1] == g.row_ptr[u] || (g.degree(u) == 1 && g.col_idx[g.row_ptr[u]] == u))
      result.singletons.push_back(u);

  // Negative samples follow the corpus frequencies raised to 3/4.
  std::vector<double> freq(n, 0.0);
  std::size_t tokens = 0;
  for (const auto& w : walks) {
    for (std::size_t x : w) freq[x] += 1.0;
    tokens += w.size();
  }
  for (double& f : freq) f = std::pow(f, 0.75);
  std::discrete_distribution<std::size_t> negative(freq.begin(), freq.end());

  const double total_steps = static_cast<double>(cfg.epochs) * static_cast<double>(tokens);
  double done = 0.0;
  std::vector<double> grad(d);
  std::vector<std::size_t> order(walks.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t wi : order) {
      const auto& walk = walks[wi];
      for (std::size_t i = 0; i < walk.size(); ++i, done += 1.0) {
        const double lr = cfg.learning_rate * std::max(1e-4, 1.0 - done / total_steps);
        double* center = in.data() + walk[i] * d;
        const std::size_t lo = i >= cfg.window ? i - cfg.window : 0;
        const std::size_t hi = std::min(walk.size(), i + cfg.window + 1);
        for (std::size_t j = lo; j < hi; ++j) {
          if (j == i) continue;
          std::fill(grad.begin(), grad.end(), 0.0);
          for (std::size_t s = 0; s <= cfg.negatives; ++s) {
            std::size_t target = walk[j];
            double label = 1.0;
            if (s > 0) {
              target = negative(rng);
              if (target == walk[j]) continue;
              label = 0.0;
            }
            double* ctx = out.data() + target * d;
            double dot = 0.0;
            for (std::size_t c = 0; c < d; ++c) dot += center[c] * ctx[c];
            const double step = (label - 1.0 / (1.0 + std::exp(-dot))) * lr;
            for (std::size_t c = 0; c < d; ++c) {
              grad[c] += step * ctx[c];
              ctx[c] += step * center[c];
            }
          }
          for (std::size_t c = 0; c < d; ++c) center[c] += grad[c];
        }
      }
    }
  }
  return result;
}

std::vector<double> node2vec_edge_score(const numerics::Tensor& embedding, const graph::SparseGraph& g) {
  if (embedding.rank() != 2 || embedding.rows() != g.n_nodes) {
    throw ShapeError("node2vec scores: embedding rows do not match the graph's nodes");
  }
  const std::size_t d = embedding.cols();
  std::vector<double> out(g.n_edges());
  for (std::size_t u = 0; u < g.n_nodes; ++u)
    for (std::size_t e = g.row_ptr[u]; e < g.row_ptr[u + 1]; ++e) {
      const double* a = embedding.data().data() + u * d;
      const double* b = embedding.data().data() + g.col_idx[e] * d;
      double s = 0.0;
      for (std::size_t c = 0; c < d; ++c) s += a[c] * b[c];
      out[e] = s;
    }
  return out;
}

}  // namespace egat::edgefeat
