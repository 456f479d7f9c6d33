#pragma once

#include <cstddef>
#include <string>

#include "egat/layers/gat.hpp"
#include "egat/layers/param.hpp"

namespace egat::layers {

// Per-edge coefficients 1 / sqrt(d_i d_j) of the symmetrically normalized
// binary adjacency, d counting every stored edge of a row (self-loop
// included). E x 1.
Tensor gcn_coefficients(const EdgeIndex& edges);

// sigma(D^-1/2 A D^-1/2 H W); sigma is ELU when `activate`, else identity.
class GcnLayer {
 public:
  GcnLayer() = default;
  GcnLayer(std::size_t in_dim, std::size_t out_dim, bool activate, Rng& rng);

  std::size_t in_dim() const noexcept { return weight_.rows(); }
  std::size_t out_dim() const noexcept { return weight_.cols(); }

  Var forward(Tape& t, Var x, const EdgeIndex& edges, const Tensor& coefficients);
  void collect(const std::string& prefix, ParamList& out);

  Tensor& weight() noexcept { return weight_; }

 private:
  Tensor weight_;
  bool activate_ = true;
};

}  // namespace egat::layers
