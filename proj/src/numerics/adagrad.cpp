#include "egat/numerics/adagrad.hpp"

#include <cmath>

#include "egat/errors.hpp"

namespace egat::numerics {

void adagrad_step(const std::vector<Tensor*>& params, AdagradState& state) {
  if (state.accumulators.size() != params.size()) {
    state.accumulators.resize(params.size());
  }
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor& param = *params[p];
    auto& acc = state.accumulators[p];
    if (acc.empty()) acc.assign(param.size(), 0.0);
    if (acc.size() != param.size()) throw ShapeError("adagrad: accumulator shape does not match parameter");
    const auto& grad = param.grad();
    const bool has_grad = grad.size() == param.size();
    for (std::size_t i = 0; i < param.size(); ++i) {
      const double g = (has_grad ? grad[i] : 0.0) + state.weight_decay * param[i];
      acc[i] += g * g;
      param[i] -= state.learning_rate * g / (std::sqrt(acc[i]) + state.epsilon);
    }
  }
}

Adagrad::Adagrad(std::vector<Tensor*> params, double learning_rate, double weight_decay, double epsilon)
    : params_(std::move(params)) {
  state_.learning_rate = learning_rate;
  state_.weight_decay = weight_decay;
  state_.epsilon = epsilon;
  state_.accumulators.resize(params_.size());
  for (std::size_t p = 0; p < params_.size(); ++p) state_.accumulators[p].assign(params_[p]->size(), 0.0);
}

void Adagrad::zero_grad() {
  for (Tensor* p : params_) p->zero_grad();
}

Adam::Adam(std::vector<Tensor*> params, double learning_rate, double beta1, double beta2, double epsilon)
    : params_(std::move(params)), lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(epsilon) {
  for (Tensor* p : params_) {
    m_.emplace_back(p->size(), 0.0);
    v_.emplace_back(p->size(), 0.0);
  }
}

void Adam::step() {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t p = 0; p < params_.size(); ++p) {
    Tensor& param = *params_[p];
    const auto& grad = param.grad();
    if (grad.size() != param.size()) continue;
    for (std::size_t i = 0; i < param.size(); ++i) {
      m_[p][i] = beta1_ * m_[p][i] + (1.0 - beta1_) * grad[i];
      v_[p][i] = beta2_ * v_[p][i] + (1.0 - beta2_) * grad[i] * grad[i];
      param[i] -= lr_ * (m_[p][i] / c1) / (std::sqrt(v_[p][i] / c2) + eps_);
    }
  }
}

void Adam::zero_grad() {
  for (Tensor* p : params_) p->zero_grad();
}

}  // namespace egat::numerics
