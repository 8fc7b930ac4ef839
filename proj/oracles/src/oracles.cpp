#include "flowpath_oracles/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace flowpath_oracles {

Vec three_way_contraction(const Dense& w, const Dense& w_z, const Dense& w_a, const Vec& b,
                          const Vec& z, const Vec& a) {
  const std::size_t d = w.rows, f = w.cols, n = w_a.cols;
  std::vector<double> tensor(d * d * n, 0.0);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j)
      for (std::size_t k = 0; k < n; ++k) {
        double s = 0.0;
        for (std::size_t m = 0; m < f; ++m) s += w.at(i, m) * w_z.at(m, j) * w_a.at(m, k);
        tensor[(i * d + j) * n + k] = s;
      }
  Vec g(d);
  for (std::size_t i = 0; i < d; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j)
      for (std::size_t k = 0; k < n; ++k) s += tensor[(i * d + j) * n + k] * z[j] * a[k];
    g[i] = s + b[i];
  }
  return g;
}

Dense numerical_jacobian(const std::function<Vec(const Vec&)>& f, const Vec& x, double eps) {
  const Vec y0 = f(x);
  Dense j{y0.size(), x.size(), Vec(y0.size() * x.size())};
  for (std::size_t c = 0; c < x.size(); ++c) {
    Vec xp = x, xm = x;
    xp[c] += eps;
    xm[c] -= eps;
    const Vec yp = f(xp), ym = f(xm);
    for (std::size_t r = 0; r < y0.size(); ++r) j.values[r * x.size() + c] = (yp[r] - ym[r]) / (2 * eps);
  }
  return j;
}

double determinant(Dense m) {
  if (m.rows != m.cols) throw std::invalid_argument("determinant of a non-square matrix");
  const std::size_t n = m.rows;
  double det = 1.0;
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t p = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(m.values[r * n + c]) > std::abs(m.values[p * n + c])) p = r;
    if (m.values[p * n + c] == 0.0) return 0.0;
    if (p != c) {
      for (std::size_t k = 0; k < n; ++k) std::swap(m.values[p * n + k], m.values[c * n + k]);
      det = -det;
    }
    const double pivot = m.values[c * n + c];
    det *= pivot;
    for (std::size_t r = c + 1; r < n; ++r) {
      const double factor = m.values[r * n + c] / pivot;
      for (std::size_t k = c; k < n; ++k) m.values[r * n + k] -= factor * m.values[c * n + k];
    }
  }
  return det;
}

DpPath dp_optimal_path(int start_age, int target_age, int cap, int num_actions,
                       const std::function<double(int, int)>& cost) {
  const double inf = std::numeric_limits<double>::infinity();
  const int span = target_age - start_age;
  if (span <= 0) return {};
  // best[s][g]: cheapest cost to finish from age start+g with s steps left.
  std::vector<std::vector<double>> best(cap + 1, std::vector<double>(span, inf));
  std::vector<std::vector<int>> choice(cap + 1, std::vector<int>(span, -1));
  for (int s = 1; s <= cap; ++s) {
    for (int g = 0; g < span; ++g) {
      for (int a = 0; a < num_actions; ++a) {
        const int next = g + a;
        const double rest = next >= span ? 0.0 : best[s - 1][next];
        const double total = cost(start_age + g, a) + rest;
        if (total < best[s][g] - 1e-9) {
          best[s][g] = total;
          choice[s][g] = a;
        }
      }
    }
  }
  if (!std::isfinite(best[cap][0])) throw std::invalid_argument("target unreachable");
  DpPath out{best[cap][0], {}};
  int g = 0;
  for (int s = cap; g < span; --s) {
    const int a = choice[s][g];
    out.actions.push_back(a);
    g += a;
  }
  return out;
}

namespace {

void enumerate(int age, int remaining, int n, double energy,
               const std::function<double(int, int)>& cost, std::vector<double>& out) {
  if (remaining == 0) {
    out.push_back(-energy);
    return;
  }
  for (int a = 0; a < n; ++a) enumerate(age + a, remaining - 1, n, energy + cost(age, a), cost, out);
}

}  // namespace

double enumerate_log_partition(int start_age, int horizon, int num_actions,
                               const std::function<double(int, int)>& cost) {
  std::vector<double> neg;
  enumerate(start_age, horizon, num_actions, 0.0, cost, neg);
  const double mx = *std::max_element(neg.begin(), neg.end());
  double s = 0.0;
  for (double v : neg) s += std::exp(v - mx);
  return mx + std::log(s);
}

Vec gibbs(const Vec& costs) {
  const double mn = *std::min_element(costs.begin(), costs.end());
  Vec p(costs.size());
  double z = 0.0;
  for (std::size_t i = 0; i < costs.size(); ++i) z += p[i] = std::exp(-(costs[i] - mn));
  for (double& v : p) v /= z;
  return p;
}

double integrate_2d(const std::function<double(double, double)>& f, double lo, double hi,
                    std::size_t n) {
  const double h = (hi - lo) / static_cast<double>(n);
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) s += f(lo + (i + 0.5) * h, lo + (j + 0.5) * h);
  return s * h * h;
}

double total_variation(const Vec& p, const Vec& q) {
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - q[i]);
  return 0.5 * s;
}

}  // namespace flowpath_oracles
