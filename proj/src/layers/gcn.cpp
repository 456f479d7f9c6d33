#include "egat/layers/gcn.hpp"

#include <cmath>

#include "egat/errors.hpp"

namespace egat::layers {

namespace ops = numerics;

Tensor gcn_coefficients(const EdgeIndex& edges) {
  const auto& rp = *edges.row_ptr;
  Tensor c = Tensor::matrix(edges.n_edges(), 1);
  for (std::size_t e = 0; e < edges.n_edges(); ++e) {
    const std::size_t i = (*edges.owner)[e], j = (*edges.neighbor)[e];
    const double di = static_cast<double>(rp[i + 1] - rp[i]);
    const double dj = static_cast<double>(rp[j + 1] - rp[j]);
    if (dj == 0.0) throw DataError("GCN normalization: node " + std::to_string(j) + " has no edges");
    c[e] = 1.0 / std::sqrt(di * dj);
  }
  return c;
}

GcnLayer::GcnLayer(std::size_t in_dim, std::size_t out_dim, bool activate, Rng& rng)
    : weight_(Tensor::matrix(in_dim, out_dim)), activate_(activate) {
  glorot_uniform(weight_, in_dim, out_dim, rng);
}

Var GcnLayer::forward(Tape& t, Var x, const EdgeIndex& edges, const Tensor& coefficients) {
  if (t.value(x).cols() != in_dim()) throw ShapeError("GCN layer: input width mismatch");
  if (coefficients.size() != edges.n_edges()) throw ShapeError("GCN layer: one coefficient per edge expected");
  const Var xw = ops::matmul(t, x, t.parameter(weight_));
  const Var out = ops::segment_aggregate(t, t.constant(coefficients), xw, edges.neighbor, edges.row_ptr);
  return activate_ ? ops::elu(t, out) : out;
}

void GcnLayer::collect(const std::string& prefix, ParamList& out) { out.emplace_back(prefix + ".weight", &weight_); }

}  // namespace egat::layers
