#pragma once

#include <cstdint>
#include <vector>

#include "phonation/tensor.hpp"

namespace phonation {

// Adam accumulator state for an ordered parameter list. Decay is decoupled:
// each step first shrinks the parameter by lr * weight_decay, then applies
// the bias-corrected Adam update from the parameter's current grad.
struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0001;
  std::int64_t step_count = 0;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
};

void adam_step(std::vector<Tensor>& params, AdamState& state, double lr);

}  // namespace phonation
