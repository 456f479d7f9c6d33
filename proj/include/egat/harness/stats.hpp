#pragma once

#include <cstddef>
#include <span>

namespace egat::harness {

struct Interval {
  double mean = 0.0;
  double sd = 0.0;  // sample standard deviation (n - 1)
  double half_width = 0.0;
  double lo = 0.0, hi = 0.0;  // raw, may leave [0, 1]
  std::size_t n = 0;
};

// Student-t interval mean +- t_{(1+level)/2, n-1} * sd / sqrt(n).
// StatError when fewer than two values are given.
Interval confidence_interval(std::span<const double> values, double level = 0.95);
// Two-sided Student-t quantile used above.
double student_t_quantile(double p, std::size_t dof);

}  // namespace egat::harness
