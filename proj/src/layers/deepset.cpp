#include "egat/layers/deepset.hpp"

#include <algorithm>
#include <numeric>

#include "egat/errors.hpp"

namespace egat::layers {

namespace ops = numerics;

DeepSet::DeepSet(std::size_t in_dim, std::size_t hidden, std::size_t out_dim, Rng& rng)
    : phi1_(in_dim, hidden, rng), phi2_(hidden, out_dim, rng), rho_(out_dim, out_dim, rng) {}

Var DeepSet::pooled(Tape& t, Var s, std::shared_ptr<const std::vector<std::size_t>> seg_ptr) {
  const Tensor& sv = t.value(s);
  if (sv.cols() != in_dim()) throw ShapeError("DeepSet: input width mismatch");
  // Summing in a content-defined order makes the pooled value independent
  // of how the set was listed, down to the last bit.
  const std::size_t d = sv.cols();
  std::vector<std::size_t> order(sv.rows());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t g = 0; g + 1 < seg_ptr->size(); ++g) {
    std::sort(order.begin() + static_cast<long>((*seg_ptr)[g]), order.begin() + static_cast<long>((*seg_ptr)[g + 1]),
              [&](std::size_t a, std::size_t b) {
                return std::lexicographical_compare(sv.data().begin() + a * d, sv.data().begin() + (a + 1) * d,
                                                    sv.data().begin() + b * d, sv.data().begin() + (b + 1) * d);
              });
  }
  const Var sorted = ops::gather_rows(t, s, std::move(order));
  const Var elems = phi2_.forward(t, ops::relu(t, phi1_.forward(t, sorted)));
  const Var ones = t.constant(Tensor({t.value(s).rows()}, 1.0));
  return ops::segment_weighted_sum(t, elems, ones, std::move(seg_ptr));
}

Var DeepSet::forward(Tape& t, Var s, std::shared_ptr<const std::vector<std::size_t>> seg_ptr) {
  return ops::elu(t, rho_.forward(t, pooled(t, s, std::move(seg_ptr))));
}

void DeepSet::collect(const std::string& prefix, ParamList& out) {
  phi1_.collect(prefix + ".phi1", out);
  phi2_.collect(prefix + ".phi2", out);
  rho_.collect(prefix + ".rho", out);
}

}  // namespace egat::layers
