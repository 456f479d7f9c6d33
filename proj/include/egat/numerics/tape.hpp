#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <limits>
#include <string_view>
#include <vector>

#include "egat/numerics/tensor.hpp"

namespace egat::numerics {

enum class OpKind {
  constant,
  parameter,
  matmul,
  add,
  mul,
  affine,
  add_row,
  mul_row,
  mul_rows,
  leaky_relu,
  elu,
  relu,
  sigmoid,
  log,
  log_softmax_rows,
  nll_loss,
  layer_norm,
  dropout,
  concat_cols,
  gather_rows,
  head_dot,
  segment_softmax,
  segment_aggregate,
  head_mean,
  set_attention,
  segment_weighted_sum,
  sum_all,
  mean_all,
};

std::string_view op_name(OpKind kind);

// Handle to a value recorded on a Tape.
struct Var {
  static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();
  std::size_t id = npos;
  bool valid() const noexcept { return id != npos; }
};

class Tape;

// Receives the gradient of the node's output and pushes contributions into
// the gradient buffers of its inputs.
using BackwardFn = std::function<void(Tape&, const std::vector<double>& out_grad)>;

// Records forward values in topological order; backward() replays the
// recorded ops in reverse. A tape is single-use and confined to one thread.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;

  Var constant(Tensor value);
  // The gradient w.r.t. `param` is added into param.grad() by backward().
  // The parameter must outlive the tape.
  Var parameter(Tensor& param);

  Var record(OpKind kind, std::vector<Var> inputs, Tensor value, BackwardFn backward);

  const Tensor& value(Var v) const { return nodes_.at(v.id).value; }
  OpKind kind(Var v) const { return nodes_.at(v.id).kind; }
  bool needs_grad(Var v) const { return nodes_.at(v.id).needs_grad; }
  // Gradient buffer of a node, zero-initialised on first access.
  std::vector<double>& grad_buffer(Var v);
  // Gradient after backward(); empty if nothing flowed into v.
  const std::vector<double>& grad(Var v) const { return nodes_.at(v.id).grad; }

  void backward(Var scalar_output);

  std::size_t size() const noexcept { return nodes_.size(); }
  std::size_t last_backward_visits() const noexcept { return visits_; }

 private:
  struct Node {
    OpKind kind;
    std::vector<Var> inputs;
    Tensor value;
    std::vector<double> grad;
    bool needs_grad = false;
    BackwardFn backward;
    Tensor* sink = nullptr;
  };
  std::deque<Node> nodes_;  // deque: references to values stay valid while recording
  std::size_t visits_ = 0;
  bool used_ = false;
};

}  // namespace egat::numerics
