#pragma once

#include <vector>

#include "egat/graph/sparse_graph.hpp"

namespace egat::edgefeat {

// Forman-Ricci curvature of every stored edge (CSR order) with unit node
// weights:
//   Ric(e=(u,v)) = w_e [2 / w_e - sum_{f ~ u, f != e} 1/sqrt(w_e w_f)
//                                - sum_{f ~ v, f != e} 1/sqrt(w_e w_f)]
// Expects a symmetric graph. Self-loops take no part in the sums of other
// edges; a self-loop at u is scored as an edge from u to itself whose weight
// is u's smallest incident weight (2 when u has no other edge). Throws
// DataError on a non-positive or non-finite weight of a non-loop edge.
std::vector<double> forman_ricci(const graph::SparseGraph& g);

// Copy of g with every non-loop weight raised to at least `floor`.
graph::SparseGraph clamp_weights(const graph::SparseGraph& g, double floor);

}  // namespace egat::edgefeat
