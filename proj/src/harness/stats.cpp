#include "egat/harness/stats.hpp"

#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <string>

#include "egat/errors.hpp"

namespace egat::harness {

double student_t_quantile(double p, std::size_t dof) {
  if (dof == 0) throw StatError("Student-t quantile needs at least one degree of freedom");
  if (!(p > 0.0 && p < 1.0)) throw StatError("Student-t quantile probability must lie in (0, 1)");
  const boost::math::students_t dist(static_cast<double>(dof));
  return boost::math::quantile(dist, p);
}

Interval confidence_interval(std::span<const double> values, double level) {
  if (values.size() < 2) {
    throw StatError("a confidence interval needs at least two trials, got " + std::to_string(values.size()));
  }
  if (!(level > 0.0 && level < 1.0)) throw StatError("confidence level must lie in (0, 1)");
  Interval ci;
  ci.n = values.size();
  const double n = static_cast<double>(ci.n);
  for (double v : values) {
    if (!std::isfinite(v)) throw StatError("non-finite trial value");
    ci.mean += v;
  }
  ci.mean /= n;
  double ss = 0.0;
  for (double v : values) ss += (v - ci.mean) * (v - ci.mean);
  ci.sd = std::sqrt(ss / (n - 1.0));
  ci.half_width = student_t_quantile(0.5 + level / 2.0, ci.n - 1) * ci.sd / std::sqrt(n);
  ci.lo = ci.mean - ci.half_width;
  ci.hi = ci.mean + ci.half_width;
  return ci;
}

}  // namespace egat::harness
