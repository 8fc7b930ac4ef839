#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace flowpath {

/// Small dense row-major matrix for the moment algebra and the regressor.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double v = 0.0) : rows(r), cols(c), data(r * c, v) {}
  Matrix(std::size_t r, std::size_t c, std::vector<double> values);

  static Matrix identity(std::size_t n);
  static Matrix column(std::span<const double> v);

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  Matrix transposed() const;

  friend bool operator==(const Matrix&, const Matrix&) = default;
};

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix hadamard(const Matrix& a, const Matrix& b);
Matrix operator+(const Matrix& a, const Matrix& b);
Matrix operator-(const Matrix& a, const Matrix& b);
Matrix outer(std::span<const double> u, std::span<const double> v);
std::vector<double> matvec(const Matrix& a, std::span<const double> x);

/// Solves (A + ridge I) x = b for symmetric positive definite A by Cholesky.
std::vector<double> solve_spd(Matrix a, std::vector<double> b, double ridge = 0.0);

double dot(std::span<const double> a, std::span<const double> b);
double log_sum_exp(std::span<const double> v);

}  // namespace flowpath
