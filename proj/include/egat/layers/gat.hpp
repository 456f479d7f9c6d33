#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "egat/graph/sparse_graph.hpp"
#include "egat/layers/param.hpp"

namespace egat::layers {

using IndexPtr = std::shared_ptr<const std::vector<std::size_t>>;

// CSR view of a graph shared by the message-passing layers. Row i lists the
// nodes that node i aggregates from; every row must be non-empty, which
// holds once self-loops are added.
struct EdgeIndex {
  std::size_t n_nodes = 0;
  IndexPtr row_ptr;   // n_nodes + 1
  IndexPtr neighbor;  // per edge: the source j of message j -> i
  IndexPtr owner;     // per edge: the row i

  std::size_t n_edges() const noexcept { return neighbor->size(); }
  // Throws DataError if some node has no incoming edge.
  static EdgeIndex of(const graph::SparseGraph& g);
};

struct GatOptions {
  bool training = false;
  double attention_dropout = 0.0;  // applied to the normalized coefficients
  Rng* rng = nullptr;              // required when training with dropout
  // Optional per-edge multiplier [E] applied to the coefficients after
  // normalization; used by the explainer's soft edge mask.
  std::optional<Var> edge_mask;
};

struct GatOutput {
  Var h;      // N x (K*F') when concatenating, N x F' when averaging
  Var alpha;  // E x K normalized coefficients, before dropout and masking
};

// One graph attention layer with K heads. Logits are
// LeakyReLU(a_self . W h_i + a_neigh . W h_j), normalized over row i.
// Concatenating layers apply ELU to the aggregated messages; averaging layers
// return the head mean without activation so it can serve as class logits.
class GatLayer {
 public:
  GatLayer() = default;
  GatLayer(std::size_t in_dim, std::size_t out_per_head, std::size_t heads, bool concat, Rng& rng,
           double negative_slope = 0.2);

  std::size_t in_dim() const noexcept { return weight_.rows(); }
  std::size_t out_per_head() const noexcept { return att_self_.cols(); }
  std::size_t heads() const noexcept { return att_self_.rows(); }
  bool concat() const noexcept { return concat_; }
  std::size_t out_dim() const noexcept { return concat_ ? heads() * out_per_head() : out_per_head(); }
  double negative_slope() const noexcept { return slope_; }

  GatOutput forward(Tape& t, Var x, const EdgeIndex& edges, const GatOptions& opt = {});
  void collect(const std::string& prefix, ParamList& out);

  Tensor& weight() noexcept { return weight_; }          // in x (K*F')
  Tensor& att_self() noexcept { return att_self_; }      // K x F'
  Tensor& att_neigh() noexcept { return att_neigh_; }    // K x F'

 private:
  Tensor weight_;
  Tensor att_self_;
  Tensor att_neigh_;
  bool concat_ = true;
  double slope_ = 0.2;
};

// Normalized coefficients of `layer` on graph g in evaluation mode, one row
// per CSR edge of g (E x K).
Tensor extract_attention(GatLayer& layer, const Tensor& node_features, const graph::SparseGraph& g);

}  // namespace egat::layers
