#include "phonation/adam.hpp"

#include <cmath>

#include "phonation/errors.hpp"

namespace phonation {

void adam_step(std::vector<Tensor>& params, AdamState& state, double lr) {
  if (lr <= 0.0) throw ValueError("adam_step: learning rate must be positive");
  if (state.first_moment.empty()) {
    state.first_moment.resize(params.size());
    state.second_moment.resize(params.size());
    for (std::size_t p = 0; p < params.size(); ++p) {
      state.first_moment[p].assign(params[p].numel(), 0.0);
      state.second_moment[p].assign(params[p].numel(), 0.0);
    }
  }
  if (state.first_moment.size() != params.size()) {
    throw ShapeError("adam_step: state tracks a different parameter list");
  }

  state.step_count += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));

  for (std::size_t p = 0; p < params.size(); ++p) {
    auto& value = params[p].data();
    const auto& g = params[p].grad();
    auto& m = state.first_moment[p];
    auto& v = state.second_moment[p];
    if (m.size() != value.size()) {
      throw ShapeError("adam_step: accumulator shape does not match parameter");
    }
    for (std::size_t i = 0; i < value.size(); ++i) {
      if (state.weight_decay != 0.0) value[i] -= lr * state.weight_decay * value[i];
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      value[i] -= lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
  }
}

}  // namespace phonation
