#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "egat/numerics/tape.hpp"
#include "egat/numerics/tensor.hpp"

namespace egat::numerics {

// Builds a scalar loss on the given tape; must be a pure function of the
// parameter values (re-seed any RNG inside).
using LossFn = std::function<Var(Tape&)>;

struct GradCheckOptions {
  double step = 1e-6;
  // Coordinates checked per parameter tensor; 0 checks every coordinate.
  std::size_t max_coords_per_param = 0;
  std::uint64_t seed = 0;
  // Relative error is |a - n| / max(|a|, |n|, floor); the floor keeps
  // gradients at the level of finite-difference noise from dominating.
  double floor = 1e-5;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t coords_checked = 0;
  std::size_t worst_param = 0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

// Tape gradient versus central differences. Throws NumericalError on a
// non-finite evaluation.
GradCheckReport grad_check(const LossFn& loss, const std::vector<Tensor*>& params, const GradCheckOptions& opts = {});

}  // namespace egat::numerics
