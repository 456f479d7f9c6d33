#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include "egat/layers/param.hpp"

namespace egat::layers {

// rho(sum_r phi(s_r)) with phi = Linear-ReLU-Linear per element and
// rho = Linear followed by ELU.
class DeepSet {
 public:
  DeepSet() = default;
  DeepSet(std::size_t in_dim, std::size_t hidden, std::size_t out_dim, Rng& rng);

  std::size_t in_dim() const noexcept { return phi1_.in_dim(); }
  std::size_t out_dim() const noexcept { return rho_.out_dim(); }

  // s: stacked set rows; returns one row per segment.
  Var forward(Tape& t, Var s, std::shared_ptr<const std::vector<std::size_t>> seg_ptr);
  // The pooled sum before rho, one row per segment.
  Var pooled(Tape& t, Var s, std::shared_ptr<const std::vector<std::size_t>> seg_ptr);
  void collect(const std::string& prefix, ParamList& out);

 private:
  Dense phi1_, phi2_, rho_;
};

}  // namespace egat::layers
