#pragma once

#include <vector>

#include "egat/numerics/tensor.hpp"

namespace egat::numerics {

struct AdagradState {
  std::vector<std::vector<double>> accumulators;  // one per parameter, same size
  double learning_rate = 0.01;
  double weight_decay = 0.0005;
  double epsilon = 1e-10;
};

// g = grad + weight_decay * param; acc += g^2; param -= lr * g / (sqrt(acc) + eps)
void adagrad_step(const std::vector<Tensor*>& params, AdagradState& state);

class Adagrad {
 public:
  Adagrad(std::vector<Tensor*> params, double learning_rate, double weight_decay, double epsilon = 1e-10);

  void step() { adagrad_step(params_, state_); }
  void zero_grad();
  const AdagradState& state() const noexcept { return state_; }

 private:
  std::vector<Tensor*> params_;
  AdagradState state_;
};

// Adam, used for explanation masks where step sizes must not depend on the
// gradient scale.
class Adam {
 public:
  Adam(std::vector<Tensor*> params, double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
       double epsilon = 1e-8);
  void step();
  void zero_grad();

 private:
  std::vector<Tensor*> params_;
  std::vector<std::vector<double>> m_, v_;
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
};

}  // namespace egat::numerics
