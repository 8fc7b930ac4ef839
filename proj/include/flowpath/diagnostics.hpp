#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "flowpath/grad_check.hpp"
#include "flowpath/rng.hpp"

namespace flowpath {

/// Overwrites every parameter with scale * N(0, 1).
void randomize_params(std::span<const NamedParam> params, Rng& rng, double scale = 0.5);

struct NamedCheck {
  std::string name;
  GradCheckReport report;
};

/// Finite-difference checks of every analytic gradient in the library on
/// small random instances.
std::vector<NamedCheck> run_gradient_checks(std::uint64_t seed, double rtol = 1e-4);

}  // namespace flowpath
