#include "flowpath/optimizer.hpp"

#include <cmath>

#include "flowpath/errors.hpp"

namespace flowpath {

OptimizerState OptimizerState::for_params(std::span<const NamedParam> params,
                                          const AdamConfig& config) {
  if (!(config.learning_rate > 0.0) || !(config.beta1 > 0.0) || !(config.beta2 > 0.0) ||
      !(config.epsilon > 0.0) || config.beta1 >= 1.0 || config.beta2 >= 1.0) {
    throw ValidationError("optimizer: learning rate, decay and epsilon must be positive");
  }
  OptimizerState s;
  s.config = config;
  s.first_moment = zeros_like(params);
  s.second_moment = zeros_like(params);
  return s;
}

void optimizer_step(std::span<const NamedParam> params, const GradSet& grads,
                    OptimizerState& state) {
  if (grads.size() != params.size() || state.first_moment.size() != params.size() ||
      state.second_moment.size() != params.size()) {
    throw ShapeError("optimizer: parameter, gradient and moment counts differ");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& shape = params[i].tensor->shape;
    if (grads[i].shape != shape || state.first_moment[i].shape != shape ||
        state.second_moment[i].shape != shape) {
      throw ShapeError("optimizer: shape mismatch for " + params[i].name);
    }
    if (!grads[i].all_finite()) {
      throw NumericError("optimizer: non-finite gradient for " + params[i].name);
    }
  }

  const auto& c = state.config;
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(c.beta1, t);
  const double correction2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i].tensor->values;
    auto& m = state.first_moment[i].values;
    auto& v = state.second_moment[i].values;
    const auto& g = grads[i].values;
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * g[j];
      v[j] = c.beta2 * v[j] + (1.0 - c.beta2) * g[j] * g[j];
      const double m_hat = m[j] / correction1;
      const double v_hat = v[j] / correction2;
      p[j] -= c.learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon);
    }
  }
}

}  // namespace flowpath
