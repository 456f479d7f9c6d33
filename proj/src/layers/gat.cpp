#include "egat/layers/gat.hpp"

#include "egat/errors.hpp"

namespace egat::layers {

namespace ops = numerics;

EdgeIndex EdgeIndex::of(const graph::SparseGraph& g) {
  EdgeIndex e;
  e.n_nodes = g.n_nodes;
  std::vector<std::size_t> owner(g.n_edges());
  for (std::size_t i = 0; i < g.n_nodes; ++i) {
    if (g.row_ptr[i + 1] == g.row_ptr[i]) {
      throw DataError("node " + std::to_string(i) + " has no neighbourhood; add self-loops first");
    }
    for (std::size_t k = g.row_ptr[i]; k < g.row_ptr[i + 1]; ++k) owner[k] = i;
  }
  e.row_ptr = std::make_shared<const std::vector<std::size_t>>(g.row_ptr);
  e.neighbor = std::make_shared<const std::vector<std::size_t>>(g.col_idx);
  e.owner = std::make_shared<const std::vector<std::size_t>>(std::move(owner));
  return e;
}

GatLayer::GatLayer(std::size_t in_dim, std::size_t out_per_head, std::size_t heads, bool concat, Rng& rng,
                   double negative_slope)
    : weight_(Tensor::matrix(in_dim, heads * out_per_head)),
      att_self_(Tensor::matrix(heads, out_per_head)),
      att_neigh_(Tensor::matrix(heads, out_per_head)),
      concat_(concat),
      slope_(negative_slope) {
  if (in_dim == 0 || out_per_head == 0 || heads == 0) throw ConfigError("GAT layer dimensions must be positive");
  glorot_uniform(weight_, in_dim, heads * out_per_head, rng);
  // Each head's attention vector [a_self | a_neigh] has length 2F' and maps
  // to one logit.
  glorot_uniform(att_self_, 2 * out_per_head, 1, rng);
  glorot_uniform(att_neigh_, 2 * out_per_head, 1, rng);
}

GatOutput GatLayer::forward(Tape& t, Var x, const EdgeIndex& edges, const GatOptions& opt) {
  if (t.value(x).cols() != in_dim()) {
    throw ShapeError("GAT layer expects " + std::to_string(in_dim()) + " input features, got " +
                     std::to_string(t.value(x).cols()));
  }
  if (t.value(x).rows() != edges.n_nodes) throw ShapeError("GAT layer: feature rows differ from node count");
  const Var wh = ops::matmul(t, x, t.parameter(weight_));
  const Var s_self = ops::head_dot(t, wh, t.parameter(att_self_));
  const Var s_neigh = ops::head_dot(t, wh, t.parameter(att_neigh_));
  const Var logits = ops::add(t, ops::gather_rows(t, s_self, *edges.owner), ops::gather_rows(t, s_neigh, *edges.neighbor));
  const Var alpha = ops::segment_softmax(t, ops::leaky_relu(t, logits, slope_), edges.row_ptr);

  Var used = alpha;
  if (opt.training && opt.attention_dropout > 0.0) {
    if (opt.rng == nullptr) throw ConfigError("GAT layer: attention dropout needs a random generator");
    used = ops::dropout(t, used, opt.attention_dropout, true, *opt.rng);
  }
  if (opt.edge_mask) used = ops::mul_rows(t, used, *opt.edge_mask);

  const Var agg = ops::segment_aggregate(t, used, wh, edges.neighbor, edges.row_ptr);
  const Var h = concat_ ? ops::elu(t, agg) : ops::head_mean(t, agg, heads());
  return {h, alpha};
}

void GatLayer::collect(const std::string& prefix, ParamList& out) {
  out.emplace_back(prefix + ".weight", &weight_);
  out.emplace_back(prefix + ".att_self", &att_self_);
  out.emplace_back(prefix + ".att_neigh", &att_neigh_);
}

Tensor extract_attention(GatLayer& layer, const Tensor& node_features, const graph::SparseGraph& g) {
  if (node_features.rank() != 2 || node_features.cols() != layer.in_dim()) {
    throw ConfigError("attention extraction: node features have width " + std::to_string(node_features.cols()) +
                      ", the layer expects " + std::to_string(layer.in_dim()));
  }
  const EdgeIndex edges = EdgeIndex::of(g);
  Tape t;
  const GatOutput out = layer.forward(t, t.constant(node_features), edges);
  Tensor alpha = t.value(out.alpha);
  if (alpha.rows() != g.n_edges()) throw InternalError("attention rows do not follow the graph's edge order");
  if (alpha.rank() == 1) alpha.reshape({alpha.size(), 1});
  return alpha;
}

}  // namespace egat::layers
