#include "glassbox/optim.hpp"

#include <cmath>
#include <string>

#include "glassbox/error.hpp"

namespace glassbox {

OptimizerState OptimizerState::sgd(double learning_rate) {
  OptimizerState s;
  s.kind = OptimizerKind::kSgd;
  s.learning_rate = learning_rate;
  return s;
}

OptimizerState OptimizerState::adam(double learning_rate) {
  OptimizerState s;
  s.kind = OptimizerKind::kAdam;
  s.learning_rate = learning_rate;
  return s;
}

void zero_grads(std::vector<Tensor>& params) {
  for (auto& p : params) p.zero_grad();
}

void optimizer_step(OptimizerState& state, std::vector<Tensor>& params) {
  if (!(state.learning_rate > 0.0)) {
    throw ParameterError("optimizer learning rate must be positive");
  }
  for (std::size_t p = 0; p < params.size(); ++p) {
    for (double g : params[p].grad()) {
      if (!std::isfinite(g)) {
        throw NumericError("optimizer step aborted: non-finite gradient in parameter " +
                           std::to_string(p) + " (shape " + shape_string(params[p].shape()) +
                           ")");
      }
    }
  }

  if (state.kind == OptimizerKind::kAdam && state.first_moment.size() != params.size()) {
    state.first_moment.clear();
    state.second_moment.clear();
    for (const auto& p : params) {
      state.first_moment.emplace_back(p.numel(), 0.0);
      state.second_moment.emplace_back(p.numel(), 0.0);
    }
  }

  ++state.step_count;
  const double t = static_cast<double>(state.step_count);
  const double bias1 = 1.0 - std::pow(state.beta1, t);
  const double bias2 = 1.0 - std::pow(state.beta2, t);

  for (std::size_t p = 0; p < params.size(); ++p) {
    auto grad = params[p].grad();
    if (grad.empty()) continue;
    auto values = params[p].data();
    if (state.kind == OptimizerKind::kSgd) {
      for (std::size_t i = 0; i < values.size(); ++i) values[i] -= state.learning_rate * grad[i];
    } else {
      auto& m = state.first_moment[p];
      auto& v = state.second_moment[p];
      for (std::size_t i = 0; i < values.size(); ++i) {
        m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * grad[i];
        v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * grad[i] * grad[i];
        const double m_hat = m[i] / bias1;
        const double v_hat = v[i] / bias2;
        values[i] -= state.learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
      }
    }
  }
  zero_grads(params);
}

}  // namespace glassbox
