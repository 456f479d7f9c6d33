#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "egat/layers/param.hpp"

namespace egat::layers {

// Multihead(Q, K, V) = concat(O_1..O_h) W^O with
// O_j = softmax(Q W^Q_j (K W^K_j)^T / sqrt(d/h)) V W^V_j, restricted to the
// row segments given by seg_ptr. The per-head projections are the column
// blocks of the d x d matrices wq, wk, wv.
class MultiheadAttention {
 public:
  MultiheadAttention() = default;
  MultiheadAttention(std::size_t dim, std::size_t heads, Rng& rng);

  std::size_t dim() const noexcept { return wq_.rows(); }
  std::size_t heads() const noexcept { return heads_; }

  // probs_out, when set, receives heads x n_s x n_s probabilities per set.
  Var forward(Tape& t, Var q, Var k, Var v, std::shared_ptr<const std::vector<std::size_t>> seg_ptr,
              std::vector<double>* probs_out = nullptr);
  void collect(const std::string& prefix, ParamList& out);

 private:
  Tensor wq_, wk_, wv_, wo_;
  std::size_t heads_ = 1;
};

// X = LN(S + Multihead(S, S, S)); out = LN(X P + rFF(X)) where
// rFF(X) = ReLU(X W1 + b1) W2 + b2 with hidden width 2 d_in, and P is a
// learned d_in x d_out projection that stands in for the identity residual
// when the widths differ.
class SetTransformerBlock {
 public:
  SetTransformerBlock() = default;
  SetTransformerBlock(std::size_t in_dim, std::size_t out_dim, std::size_t heads, Rng& rng);

  std::size_t in_dim() const noexcept { return attention_.dim(); }
  std::size_t out_dim() const noexcept { return ln2_gain_.size(); }
  std::size_t heads() const noexcept { return attention_.heads(); }

  // s: rows of all sets stacked, set r spanning [seg_ptr[r], seg_ptr[r+1]).
  Var forward(Tape& t, Var s, std::shared_ptr<const std::vector<std::size_t>> seg_ptr,
              std::vector<double>* probs_out = nullptr);
  void collect(const std::string& prefix, ParamList& out);

 private:
  MultiheadAttention attention_;
  Tensor ln1_gain_, ln1_bias_;
  Dense ff1_, ff2_;
  Tensor proj_;  // empty when in_dim == out_dim
  Tensor ln2_gain_, ln2_bias_;
};

// Learned weighted sum over canonically ordered set elements:
// w = sum_j lambda_j w_j over the first n entries of lambda. In averaged mode
// lambda is replaced by 1/n. lambda starts at 1/d_max.
class SetAggregator {
 public:
  SetAggregator() = default;
  explicit SetAggregator(std::size_t d_max, bool averaged = false);

  std::size_t d_max() const noexcept { return lambda_.size(); }
  bool averaged() const noexcept { return averaged_; }
  void set_averaged(bool averaged) noexcept { averaged_ = averaged; }
  // A frozen lambda enters the tape as a constant.
  void set_frozen(bool frozen) noexcept { frozen_ = frozen; }
  bool frozen() const noexcept { return frozen_; }

  // rows: STB outputs whose sets are already in canonical order. Throws
  // ConfigError when a set is larger than d_max.
  Var forward(Tape& t, Var rows, std::shared_ptr<const std::vector<std::size_t>> seg_ptr);
  void collect(const std::string& prefix, ParamList& out);

  Tensor& lambda() noexcept { return lambda_; }

 private:
  Tensor lambda_;
  bool averaged_ = false;
  bool frozen_ = false;
};

// For each segment, the row indices sorted by (key ascending, id ascending):
// the nearest neighbour comes first. The result is a permutation of all rows
// that keeps every segment in place.
std::vector<std::size_t> canonical_order(std::span<const std::size_t> seg_ptr, std::span<const double> keys,
                                         std::span<const std::size_t> ids);

// Encodes one set (n x d_in) with its ordering keys into a single
// aggregated vector (1 x d_out).
Var set_encode_aggregate(Tape& t, SetTransformerBlock& block, SetAggregator& agg, Var s,
                         std::span<const double> keys, std::span<const std::size_t> ids);

}  // namespace egat::layers
