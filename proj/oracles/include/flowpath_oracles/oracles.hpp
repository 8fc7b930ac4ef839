#pragma once

// Slow, direct reference computations used to check the main library.
// Nothing here calls into flowpath.

#include <cstddef>
#include <functional>
#include <vector>

namespace flowpath_oracles {

using Vec = std::vector<double>;
/// Row-major dense matrix.
struct Dense {
  std::size_t rows = 0;
  std::size_t cols = 0;
  Vec values;
  double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
};

/// g_i = Σ_jk ŵ_ijk z_j a_k + b_i with the full tensor
/// ŵ_ijk = Σ_m W_im Wz_mj Wa_mk materialized first.
Vec three_way_contraction(const Dense& w, const Dense& w_z, const Dense& w_a, const Vec& b,
                          const Vec& z, const Vec& a);

/// Central-difference Jacobian, J[i][j] = d f_i / d x_j.
Dense numerical_jacobian(const std::function<Vec(const Vec&)>& f, const Vec& x,
                         double eps = 1e-6);

/// Gaussian elimination with partial pivoting.
double determinant(Dense m);

struct DpPath {
  double cost = 0.0;
  std::vector<int> actions;
};

/// Shortest path on the (age, steps used) DAG: each step adds its action to
/// the age, a path ends once age >= target, at most `cap` steps. Ties go to
/// the smaller action at the earliest step.
DpPath dp_optimal_path(int start_age, int target_age, int cap, int num_actions,
                       const std::function<double(int age, int action)>& cost);

/// log Σ over all action sequences of length `horizon` of exp(-Σ cost),
/// where the cost depends on (age, action) and age starts at `start_age`.
double enumerate_log_partition(int start_age, int horizon, int num_actions,
                               const std::function<double(int age, int action)>& cost);

/// Gibbs distribution exp(-c) / Σ exp(-c).
Vec gibbs(const Vec& costs);

/// Midpoint rule over [lo, hi]^2 with n cells per side.
double integrate_2d(const std::function<double(double, double)>& f, double lo, double hi,
                    std::size_t n);

double total_variation(const Vec& p, const Vec& q);

}  // namespace flowpath_oracles
