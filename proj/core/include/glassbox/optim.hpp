#pragma once

#include <cstdint>
#include <vector>

#include "glassbox/tensor.hpp"

namespace glassbox {

enum class OptimizerKind { kSgd, kAdam };

struct OptimizerState {
  OptimizerKind kind = OptimizerKind::kAdam;
  double learning_rate = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t step_count = 0;
  // Adam moments, one buffer per parameter (allocated on the first step).
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;

  static OptimizerState sgd(double learning_rate);
  static OptimizerState adam(double learning_rate);
};

// Applies one SGD or bias-corrected Adam update using each parameter's
// accumulated gradient, then zeroes the gradients. A non-finite gradient
// aborts the whole step (no parameter is touched) with NumericError.
// Parameters without a gradient are treated as having a zero gradient.
void optimizer_step(OptimizerState& state, std::vector<Tensor>& params);

void zero_grads(std::vector<Tensor>& params);

}  // namespace glassbox
