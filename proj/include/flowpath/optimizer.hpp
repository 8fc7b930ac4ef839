#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "flowpath/tensor.hpp"

namespace flowpath {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  friend bool operator==(const AdamConfig&, const AdamConfig&) = default;
};

/// Adam moment accumulators for one parameter list.
struct OptimizerState {
  AdamConfig config;
  std::vector<ParamTensor> first_moment;
  std::vector<ParamTensor> second_moment;
  std::uint64_t step = 0;

  static OptimizerState for_params(std::span<const NamedParam> params, const AdamConfig& config);

  friend bool operator==(const OptimizerState&, const OptimizerState&) = default;
};

/// One bias-corrected Adam update (descent on the loss whose gradient is
/// `grads`). Validates every gradient before touching any parameter.
void optimizer_step(std::span<const NamedParam> params, const GradSet& grads,
                    OptimizerState& state);

}  // namespace flowpath
