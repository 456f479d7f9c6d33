#include "egat/layers/set_transformer.hpp"

#include <algorithm>
#include <numeric>

#include "egat/errors.hpp"

namespace egat::layers {

namespace ops = numerics;

MultiheadAttention::MultiheadAttention(std::size_t dim, std::size_t heads, Rng& rng)
    : wq_(Tensor::matrix(dim, dim)),
      wk_(Tensor::matrix(dim, dim)),
      wv_(Tensor::matrix(dim, dim)),
      wo_(Tensor::matrix(dim, dim)),
      heads_(heads) {
  if (dim == 0 || heads == 0 || dim % heads != 0) {
    throw ConfigError("multihead attention: width " + std::to_string(dim) + " is not divisible into " +
                      std::to_string(heads) + " heads");
  }
  for (Tensor* w : {&wq_, &wk_, &wv_, &wo_}) glorot_uniform(*w, dim, dim, rng);
}

Var MultiheadAttention::forward(Tape& t, Var q, Var k, Var v, std::shared_ptr<const std::vector<std::size_t>> seg_ptr,
                                std::vector<double>* probs_out) {
  const Var qp = ops::matmul(t, q, t.parameter(wq_));
  const Var kp = ops::matmul(t, k, t.parameter(wk_));
  const Var vp = ops::matmul(t, v, t.parameter(wv_));
  const Var o = ops::set_attention(t, qp, kp, vp, std::move(seg_ptr), heads_, probs_out);
  return ops::matmul(t, o, t.parameter(wo_));
}

void MultiheadAttention::collect(const std::string& prefix, ParamList& out) {
  out.emplace_back(prefix + ".wq", &wq_);
  out.emplace_back(prefix + ".wk", &wk_);
  out.emplace_back(prefix + ".wv", &wv_);
  out.emplace_back(prefix + ".wo", &wo_);
}

SetTransformerBlock::SetTransformerBlock(std::size_t in_dim, std::size_t out_dim, std::size_t heads, Rng& rng)
    : attention_(in_dim, heads, rng),
      ln1_gain_(trainable({in_dim}, 1.0)),
      ln1_bias_(trainable({in_dim})),
      ff1_(in_dim, 2 * in_dim, rng),
      ff2_(2 * in_dim, out_dim, rng),
      ln2_gain_(trainable({out_dim}, 1.0)),
      ln2_bias_(trainable({out_dim})) {
  if (out_dim == 0) throw ConfigError("set transformer block: output width must be positive");
  if (in_dim != out_dim) {
    proj_ = Tensor::matrix(in_dim, out_dim);
    glorot_uniform(proj_, in_dim, out_dim, rng);
  }
}

Var SetTransformerBlock::forward(Tape& t, Var s, std::shared_ptr<const std::vector<std::size_t>> seg_ptr,
                                 std::vector<double>* probs_out) {
  if (t.value(s).cols() != in_dim()) {
    throw ShapeError("set transformer block expects width " + std::to_string(in_dim()) + ", got " +
                     std::to_string(t.value(s).cols()));
  }
  const Var mh = attention_.forward(t, s, s, s, std::move(seg_ptr), probs_out);
  const Var x = ops::layer_norm(t, ops::add(t, s, mh), t.parameter(ln1_gain_), t.parameter(ln1_bias_));
  const Var ff = ff2_.forward(t, ops::relu(t, ff1_.forward(t, x)));
  const Var skip = proj_.size() == 0 ? x : ops::matmul(t, x, t.parameter(proj_));
  return ops::layer_norm(t, ops::add(t, skip, ff), t.parameter(ln2_gain_), t.parameter(ln2_bias_));
}

void SetTransformerBlock::collect(const std::string& prefix, ParamList& out) {
  attention_.collect(prefix + ".attn", out);
  out.emplace_back(prefix + ".ln1.gain", &ln1_gain_);
  out.emplace_back(prefix + ".ln1.bias", &ln1_bias_);
  ff1_.collect(prefix + ".ff1", out);
  ff2_.collect(prefix + ".ff2", out);
  if (proj_.size() != 0) out.emplace_back(prefix + ".proj", &proj_);
  out.emplace_back(prefix + ".ln2.gain", &ln2_gain_);
  out.emplace_back(prefix + ".ln2.bias", &ln2_bias_);
}

SetAggregator::SetAggregator(std::size_t d_max, bool averaged) : averaged_(averaged) {
  if (d_max == 0) throw ConfigError("set aggregation needs a positive maximum set size");
  lambda_ = trainable({d_max}, 1.0 / static_cast<double>(d_max));
}

Var SetAggregator::forward(Tape& t, Var rows, std::shared_ptr<const std::vector<std::size_t>> seg_ptr) {
  const auto& sp = *seg_ptr;
  std::vector<std::size_t> position(sp.back());
  std::vector<double> inv_size(sp.back());
  for (std::size_t s = 0; s + 1 < sp.size(); ++s) {
    const std::size_t n = sp[s + 1] - sp[s];
    if (n > d_max()) {
      throw ConfigError("set of size " + std::to_string(n) + " exceeds the aggregation capacity " +
                        std::to_string(d_max()) + "; rebuild the model with a larger maximum degree");
    }
    for (std::size_t r = sp[s]; r < sp[s + 1]; ++r) {
      position[r] = r - sp[s];
      inv_size[r] = 1.0 / static_cast<double>(n);
    }
  }
  Var weights;
  if (averaged_) {
    weights = t.constant(Tensor::vector(std::move(inv_size)));
  } else {
    const Var lambda = frozen_ ? t.constant(Tensor(lambda_.shape(), lambda_.values())) : t.parameter(lambda_);
    weights = ops::gather_rows(t, lambda, std::move(position));
  }
  return ops::segment_weighted_sum(t, rows, weights, std::move(seg_ptr));
}

void SetAggregator::collect(const std::string& prefix, ParamList& out) { out.emplace_back(prefix + ".lambda", &lambda_); }

std::vector<std::size_t> canonical_order(std::span<const std::size_t> seg_ptr, std::span<const double> keys,
                                         std::span<const std::size_t> ids) {
  if (seg_ptr.empty() || keys.size() != seg_ptr.back() || ids.size() != keys.size()) {
    throw ShapeError("canonical_order: keys and ids must cover every segment row");
  }
  std::vector<std::size_t> order(keys.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t s = 0; s + 1 < seg_ptr.size(); ++s) {
    std::sort(order.begin() + static_cast<long>(seg_ptr[s]), order.begin() + static_cast<long>(seg_ptr[s + 1]),
              [&](std::size_t a, std::size_t b) {
                if (keys[a] != keys[b]) return keys[a] < keys[b];
                return ids[a] < ids[b];
              });
  }
  return order;
}

Var set_encode_aggregate(Tape& t, SetTransformerBlock& block, SetAggregator& agg, Var s,
                         std::span<const double> keys, std::span<const std::size_t> ids) {
  const std::size_t n = t.value(s).rows();
  if (n == 0) throw ShapeError("set_encode_aggregate: empty set");
  auto seg = std::make_shared<const std::vector<std::size_t>>(std::vector<std::size_t>{0, n});
  const Var ordered = ops::gather_rows(t, s, canonical_order(*seg, keys, ids));
  return agg.forward(t, block.forward(t, ordered, seg), seg);
}

}  // namespace egat::layers
