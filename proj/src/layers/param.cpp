#include "egat/layers/param.hpp"

#include <cmath>
#include <random>

#include "egat/errors.hpp"

namespace egat::layers {

std::vector<Tensor*> tensors_of(const ParamList& params) {
  std::vector<Tensor*> out;
  out.reserve(params.size());
  for (const auto& [name, t] : params) out.push_back(t);
  return out;
}

void glorot_uniform(Tensor& w, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  if (fan_in + fan_out == 0) throw ConfigError("glorot_uniform: zero fan-in and fan-out");
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> unif(-bound, bound);
  for (double& v : w.values()) v = unif(rng);
  w.set_requires_grad(true);
}

Tensor trainable(numerics::Shape shape, double value) {
  Tensor t(std::move(shape), value);
  t.set_requires_grad(true);
  return t;
}

Dense::Dense(std::size_t in, std::size_t out, Rng& rng) : weight(Tensor::matrix(in, out)), bias(trainable({out})) {
  glorot_uniform(weight, in, out, rng);
}

Var Dense::forward(Tape& t, Var x) {
  return numerics::add_row(t, numerics::matmul(t, x, t.parameter(weight)), t.parameter(bias));
}

void Dense::collect(const std::string& prefix, ParamList& out) {
  out.emplace_back(prefix + ".weight", &weight);
  out.emplace_back(prefix + ".bias", &bias);
}

}  // namespace egat::layers
