#include "egat/edgefeat/curvature.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "egat/errors.hpp"
#include "egat/kernels.hpp"

namespace egat::edgefeat {

std::vector<double> forman_ricci(const graph::SparseGraph& g) {
  for (std::size_t u = 0; u < g.n_nodes; ++u)
    for (std::size_t e = g.row_ptr[u]; e < g.row_ptr[u + 1]; ++e) {
      const double w = g.edge_weight[e];
      if (g.col_idx[e] != u && !(w > 0.0 && std::isfinite(w))) {
        throw DataError("curvature needs positive finite edge weights; edge " + std::to_string(u) + "-" +
                        std::to_string(g.col_idx[e]) + " has weight " + std::to_string(w));
      }
    }
  const graph::SparseGraph plain = graph::without_self_loops(g);
  const std::vector<double> inner =
      kernels::omp::forman_curvature({plain.row_ptr, plain.col_idx, plain.edge_weight});

  std::vector<double> out(g.n_edges());
  for (std::size_t u = 0; u < g.n_nodes; ++u) {
    std::size_t k = plain.row_ptr[u];
    for (std::size_t e = g.row_ptr[u]; e < g.row_ptr[u + 1]; ++e) {
      if (g.col_idx[e] != u) {
        out[e] = inner[k++];
        continue;
      }
      const auto first = plain.edge_weight.begin() + static_cast<long>(plain.row_ptr[u]);
      const auto last = plain.edge_weight.begin() + static_cast<long>(plain.row_ptr[u + 1]);
      if (first == last) {
        out[e] = 2.0;
        continue;
      }
      const double w = *std::min_element(first, last);
      double s = 0.0;
      for (auto it = first; it != last; ++it) s += 1.0 / std::sqrt(w * *it);
      out[e] = w * (2.0 / w - 2.0 * s);
    }
  }
  return out;
}

graph::SparseGraph clamp_weights(const graph::SparseGraph& g, double floor) {
  graph::SparseGraph out = g;
  for (std::size_t u = 0; u < g.n_nodes; ++u)
    for (std::size_t e = g.row_ptr[u]; e < g.row_ptr[u + 1]; ++e)
      if (g.col_idx[e] != u) out.edge_weight[e] = std::max(out.edge_weight[e], floor);
  return out;
}

}  // namespace egat::edgefeat
