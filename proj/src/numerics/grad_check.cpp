#include "egat/numerics/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "egat/errors.hpp"

namespace egat::numerics {

namespace {

double evaluate(const LossFn& loss) {
  Tape tape;
  const Var out = loss(tape);
  const double v = tape.value(out)[0];
  if (!std::isfinite(v)) throw NumericalError("grad_check: loss is not finite");
  return v;
}

}  // namespace

GradCheckReport grad_check(const LossFn& loss, const std::vector<Tensor*>& params, const GradCheckOptions& opts) {
  std::vector<std::vector<double>> saved;
  for (Tensor* p : params) {
    saved.push_back(p->grad());
    p->set_requires_grad(true);
    p->zero_grad();
  }
  {
    Tape tape;
    const Var out = loss(tape);
    if (!std::isfinite(tape.value(out)[0])) throw NumericalError("grad_check: loss is not finite");
    tape.backward(out);
  }
  std::vector<std::vector<double>> analytic;
  for (Tensor* p : params) analytic.push_back(p->grad());

  GradCheckReport report;
  std::mt19937_64 rng(opts.seed);
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Tensor& p = *params[pi];
    std::vector<std::size_t> coords(p.size());
    std::iota(coords.begin(), coords.end(), 0);
    if (opts.max_coords_per_param > 0 && coords.size() > opts.max_coords_per_param) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(opts.max_coords_per_param);
    }
    for (std::size_t i : coords) {
      const double orig = p[i];
      p[i] = orig + opts.step;
      const double up = evaluate(loss);
      p[i] = orig - opts.step;
      const double down = evaluate(loss);
      p[i] = orig;
      const double numeric = (up - down) / (2.0 * opts.step);
      const double a = analytic[pi].empty() ? 0.0 : analytic[pi][i];
      const double denom = std::max({std::abs(a), std::abs(numeric), opts.floor});
      const double rel = std::abs(a - numeric) / denom;
      ++report.coords_checked;
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst_param = pi;
        report.worst_index = i;
        report.worst_analytic = a;
        report.worst_numeric = numeric;
      }
    }
  }
  for (std::size_t pi = 0; pi < params.size(); ++pi) params[pi]->grad() = saved[pi];
  return report;
}

}  // namespace egat::numerics
