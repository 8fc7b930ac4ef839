#include "flowpath/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "flowpath/errors.hpp"

namespace flowpath {

GradSet finite_diff_grad(const std::function<double()>& loss, std::span<const NamedParam> params,
                         double epsilon) {
  if (!(epsilon > 0.0)) throw DomainError("finite_diff_grad: epsilon must be positive");
  GradSet out = zeros_like(params);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& values = params[i].tensor->values;
    for (std::size_t j = 0; j < values.size(); ++j) {
      const double saved = values[j];
      values[j] = saved + epsilon;
      const double up = loss();
      values[j] = saved - epsilon;
      const double down = loss();
      values[j] = saved;
      if (!std::isfinite(up) || !std::isfinite(down)) {
        throw NumericError("finite_diff_grad: non-finite loss while perturbing " +
                           params[i].name + "[" + std::to_string(j) + "]");
      }
      out[i][j] = (up - down) / (2.0 * epsilon);
    }
  }
  return out;
}

GradCheckReport compare_gradients(std::span<const NamedParam> params, const GradSet& analytic,
                                  const GradSet& numeric, double rtol, double abs_floor) {
  if (analytic.size() != params.size() || numeric.size() != params.size()) {
    throw ShapeError("compare_gradients: gradient sets do not match the parameter list");
  }
  GradCheckReport report;
  double worst_excess = -1.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (analytic[i].size() != numeric[i].size()) {
      throw ShapeError("compare_gradients: size mismatch for " + params[i].name);
    }
    for (std::size_t j = 0; j < analytic[i].size(); ++j) {
      const double a = analytic[i][j];
      const double n = numeric[i][j];
      const double diff = std::abs(a - n);
      const double scale = std::max(std::abs(a), std::abs(n));
      const double allowed = std::max(rtol * scale, abs_floor);
      report.checked += 1;
      report.max_abs_error = std::max(report.max_abs_error, diff);
      if (scale > abs_floor) report.max_rel_error = std::max(report.max_rel_error, diff / scale);
      const double excess = diff / allowed;
      if (excess > worst_excess) {
        worst_excess = excess;
        report.worst_param = params[i].name;
        report.worst_index = j;
      }
      if (!(diff <= allowed)) report.passed = false;
    }
  }
  return report;
}

}  // namespace flowpath
