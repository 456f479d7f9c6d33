#include "egat/numerics/tape.hpp"

#include "egat/errors.hpp"

namespace egat::numerics {

std::string_view op_name(OpKind kind) {
  switch (kind) {
    case OpKind::constant: return "constant";
    case OpKind::parameter: return "parameter";
    case OpKind::matmul: return "matmul";
    case OpKind::add: return "add";
    case OpKind::mul: return "mul";
    case OpKind::affine: return "affine";
    case OpKind::add_row: return "add_row";
    case OpKind::mul_row: return "mul_row";
    case OpKind::mul_rows: return "mul_rows";
    case OpKind::leaky_relu: return "leaky_relu";
    case OpKind::elu: return "elu";
    case OpKind::relu: return "relu";
    case OpKind::sigmoid: return "sigmoid";
    case OpKind::log: return "log";
    case OpKind::log_softmax_rows: return "log_softmax_rows";
    case OpKind::nll_loss: return "nll_loss";
    case OpKind::layer_norm: return "layer_norm";
    case OpKind::dropout: return "dropout";
    case OpKind::concat_cols: return "concat_cols";
    case OpKind::gather_rows: return "gather_rows";
    case OpKind::head_dot: return "head_dot";
    case OpKind::segment_softmax: return "segment_softmax";
    case OpKind::segment_aggregate: return "segment_aggregate";
    case OpKind::head_mean: return "head_mean";
    case OpKind::set_attention: return "set_attention";
    case OpKind::segment_weighted_sum: return "segment_weighted_sum";
    case OpKind::sum_all: return "sum_all";
    case OpKind::mean_all: return "mean_all";
  }
  return "?";
}

Var Tape::constant(Tensor value) {
  nodes_.push_back({OpKind::constant, {}, std::move(value), {}, false, {}, nullptr});
  return {nodes_.size() - 1};
}

Var Tape::parameter(Tensor& param) {
  Tensor copy(param.shape(), param.values());
  nodes_.push_back({OpKind::parameter, {}, std::move(copy), {}, true, {}, &param});
  return {nodes_.size() - 1};
}

Var Tape::record(OpKind kind, std::vector<Var> inputs, Tensor value, BackwardFn backward) {
  bool needs = false;
  for (Var in : inputs) {
    if (in.id >= nodes_.size()) throw InternalError("op input recorded after its consumer");
    needs = needs || nodes_[in.id].needs_grad;
  }
  nodes_.push_back({kind, std::move(inputs), std::move(value), {}, needs, needs ? std::move(backward) : BackwardFn{},
                    nullptr});
  return {nodes_.size() - 1};
}

std::vector<double>& Tape::grad_buffer(Var v) {
  Node& node = nodes_.at(v.id);
  if (node.grad.size() != node.value.size()) node.grad.assign(node.value.size(), 0.0);
  return node.grad;
}

void Tape::backward(Var scalar_output) {
  if (used_) throw InternalError("backward() called twice on one tape");
  used_ = true;
  Node& out = nodes_.at(scalar_output.id);
  if (out.value.size() != 1) throw ShapeError("backward() needs a scalar output, got " + shape_str(out.value.shape()));
  grad_buffer(scalar_output)[0] = 1.0;
  visits_ = 0;
  for (std::size_t i = scalar_output.id + 1; i-- > 0;) {
    Node& node = nodes_[i];
    ++visits_;
    if (!node.needs_grad || node.grad.empty()) continue;
    if (node.backward) node.backward(*this, node.grad);
    if (node.sink != nullptr) {
      auto& dst = node.sink->grad();
      if (dst.size() != node.grad.size()) dst.assign(node.grad.size(), 0.0);
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += node.grad[k];
    }
  }
}

}  // namespace egat::numerics
