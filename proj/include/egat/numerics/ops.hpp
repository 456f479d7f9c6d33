#pragma once

// Differentiable operations recorded on a Tape. Every op validates shapes
// eagerly and throws ShapeError on mismatch.

#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <vector>

#include "egat/numerics/tape.hpp"

namespace egat::numerics {

using Rng = std::mt19937_64;

Var matmul(Tape& t, Var a, Var b);
Var add(Tape& t, Var a, Var b);
Var mul(Tape& t, Var a, Var b);
// alpha * x + beta, elementwise
Var affine(Tape& t, Var x, double alpha, double beta);
inline Var scale(Tape& t, Var x, double alpha) { return affine(t, x, alpha, 0.0); }
// x[N x d] + b[d] broadcast over rows
Var add_row(Tape& t, Var x, Var b);
// x[N x d] * g[d] broadcast over rows
Var mul_row(Tape& t, Var x, Var g);
// x[N x d] * w[N] (row i scaled by w[i])
Var mul_rows(Tape& t, Var x, Var w);

Var leaky_relu(Tape& t, Var x, double slope);
Var elu(Tape& t, Var x);
Var relu(Tape& t, Var x);
Var sigmoid(Tape& t, Var x);
Var log(Tape& t, Var x);
Var log_softmax_rows(Tape& t, Var x);
// Mean negative log-likelihood over rows whose label is >= 0.
Var nll_loss(Tape& t, Var log_probs, std::span<const int> labels);
Var layer_norm(Tape& t, Var x, Var gain, Var bias, double eps = 1e-5);
// Inverted dropout; identity when !training or p == 0.
Var dropout(Tape& t, Var x, double p, bool training, Rng& rng);

Var concat_cols(Tape& t, const std::vector<Var>& parts);
Var gather_rows(Tape& t, Var x, std::vector<std::size_t> rows);

// x[N x (K*D)], a[K x D] -> [N x K]: per-head dot product of row blocks.
Var head_dot(Tape& t, Var x, Var a);
// Softmax within each row segment [seg_ptr[s], seg_ptr[s+1]), independently
// for every column. Max-subtracted. Empty segments are a contract violation.
Var segment_softmax(Tape& t, Var logits, std::shared_ptr<const std::vector<std::size_t>> seg_ptr);
// out[s, h*D + d] = sum_{e in seg s} alpha[e, h] * values[src[e], h*D + d]
Var segment_aggregate(Tape& t, Var alpha, Var values, std::shared_ptr<const std::vector<std::size_t>> src,
                      std::shared_ptr<const std::vector<std::size_t>> seg_ptr);
// [N x (K*D)] -> [N x D], mean over the K row blocks.
Var head_mean(Tape& t, Var x, std::size_t heads);

// Attention restricted to row segments ("sets"): for each set s and head h,
// out_s[:, h] = softmax(q_s,h k_s,h^T / sqrt(d/heads)) v_s,h with the heads
// being contiguous column blocks of width d/heads. When `probs_out` is given
// it receives, per set, heads x n_s x n_s row-major probabilities
// concatenated in set order.
Var set_attention(Tape& t, Var q, Var k, Var v, std::shared_ptr<const std::vector<std::size_t>> seg_ptr,
                  std::size_t heads, std::vector<double>* probs_out = nullptr);
// out[s] = sum_{r in seg s} w[r] * x[r]; w is [R] or [R x 1].
Var segment_weighted_sum(Tape& t, Var x, Var w, std::shared_ptr<const std::vector<std::size_t>> seg_ptr);

Var sum_all(Tape& t, Var x);
Var mean_all(Tape& t, Var x);

}  // namespace egat::numerics
