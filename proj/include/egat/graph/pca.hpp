#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "egat/numerics/tensor.hpp"

namespace egat::graph {

struct PcaModel {
  numerics::Tensor components;  // features x d, orthonormal columns
  std::vector<double> mean;     // per input feature
  std::vector<double> explained_variance;  // per component, non-increasing

  std::size_t dims() const noexcept { return explained_variance.size(); }
  // Centres x (rows = samples) with the fitted means and projects it.
  numerics::Tensor project(const numerics::Tensor& x) const;
  numerics::Tensor reconstruct(const numerics::Tensor& z) const;
};

// d == 0 selects min(50, rows - 1, cols). Each component's largest-magnitude
// loading is made positive (first such index on ties).
std::pair<PcaModel, numerics::Tensor> pca_fit_project(const numerics::Tensor& x, std::size_t d = 0);

}  // namespace egat::graph
