#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "egat/graph/sparse_graph.hpp"
#include "egat/numerics/tensor.hpp"

namespace egat::test {

inline numerics::Tensor random_tensor(numerics::Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  numerics::Tensor t(std::move(shape));
  std::uniform_real_distribution<double> u(lo, hi);
  for (double& v : t.values()) v = u(rng);
  return t;
}

inline numerics::Tensor random_param(numerics::Shape shape, std::mt19937_64& rng) {
  numerics::Tensor t = random_tensor(std::move(shape), rng);
  t.set_requires_grad(true);
  return t;
}

// Erdos-Renyi graph, symmetric, positive random weights, optionally with
// zero-weight self-loops on every node.
inline graph::SparseGraph random_graph(std::size_t n, double p, std::mt19937_64& rng, bool self_loops = true) {
  std::vector<graph::Edge> edges;
  std::bernoulli_distribution coin(p);
  std::uniform_real_distribution<double> w(0.1, 2.0);
  for (std::size_t u = 0; u < n; ++u)
    for (std::size_t v = u + 1; v < n; ++v)
      if (coin(rng)) edges.push_back({u, v, w(rng)});
  graph::SparseGraph g = graph::symmetrize(graph::SparseGraph::from_edges(n, std::move(edges)));
  return self_loops ? graph::with_self_loops(g) : g;
}

// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("egat-" + tag + "-" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace egat::test
