#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>

#include "flowpath/tensor.hpp"

namespace flowpath {

/// Central-difference gradient of `loss` w.r.t. every scalar in `params`.
/// Parameters are restored to their original values afterwards.
GradSet finite_diff_grad(const std::function<double()>& loss, std::span<const NamedParam> params,
                         double epsilon = 1e-5);

struct GradCheckReport {
  bool passed = true;
  double max_abs_error = 0.0;
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  std::size_t checked = 0;
};

/// Elementwise comparison. An entry passes when
/// |a - n| <= max(rtol * max(|a|, |n|), abs_floor).
GradCheckReport compare_gradients(std::span<const NamedParam> params, const GradSet& analytic,
                                  const GradSet& numeric, double rtol = 1e-4,
                                  double abs_floor = 1e-8);

}  // namespace flowpath
