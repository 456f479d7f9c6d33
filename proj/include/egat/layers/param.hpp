#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "egat/numerics/ops.hpp"
#include "egat/numerics/tape.hpp"
#include "egat/numerics/tensor.hpp"

namespace egat::layers {

using numerics::Rng;
using numerics::Tape;
using numerics::Tensor;
using numerics::Var;

// Named references to trainable tensors, in a stable order. Names are the
// keys of checkpoint blobs.
using ParamList = std::vector<std::pair<std::string, Tensor*>>;

std::vector<Tensor*> tensors_of(const ParamList& params);

// U(-b, b) with b = sqrt(6 / (fan_in + fan_out)); marks the tensor trainable.
void glorot_uniform(Tensor& w, std::size_t fan_in, std::size_t fan_out, Rng& rng);
// A trainable tensor of the given shape filled with `value`.
Tensor trainable(numerics::Shape shape, double value = 0.0);

// y = x W + b
struct Dense {
  Tensor weight;  // in x out
  Tensor bias;    // out

  Dense() = default;
  Dense(std::size_t in, std::size_t out, Rng& rng);

  std::size_t in_dim() const noexcept { return weight.rows(); }
  std::size_t out_dim() const noexcept { return bias.size(); }
  Var forward(Tape& t, Var x);
  void collect(const std::string& prefix, ParamList& out);
};

}  // namespace egat::layers
