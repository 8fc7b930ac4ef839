#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace flowpath {

using Observation = std::vector<double>;

/// Dense row-major array of doubles with an explicit shape.
struct ParamTensor {
  std::vector<std::size_t> shape;
  std::vector<double> values;

  ParamTensor() = default;
  /// Zero-filled tensor of the given shape.
  explicit ParamTensor(std::vector<std::size_t> shape_);
  /// Throws ShapeError when product(shape) != values.size().
  ParamTensor(std::vector<std::size_t> shape_, std::vector<double> values_);

  std::size_t size() const { return values.size(); }
  std::size_t rows() const { return shape.empty() ? 0 : shape[0]; }
  std::size_t cols() const { return shape.size() < 2 ? 1 : shape[1]; }

  double& operator[](std::size_t i) { return values[i]; }
  double operator[](std::size_t i) const { return values[i]; }
  double& at(std::size_t r, std::size_t c) { return values[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return values[r * cols() + c]; }

  bool all_finite() const;
  void fill(double v);

  friend bool operator==(const ParamTensor&, const ParamTensor&) = default;
};

std::size_t shape_product(std::span<const std::size_t> shape);
std::string shape_string(std::span<const std::size_t> shape);

/// Non-owning handle to one trainable tensor inside a model.
struct NamedParam {
  std::string name;
  ParamTensor* tensor = nullptr;
};

/// Gradients aligned index-by-index with a model's parameter list.
using GradSet = std::vector<ParamTensor>;

GradSet zeros_like(std::span<const NamedParam> params);
void scale_grads(GradSet& grads, double factor);
void add_grads(GradSet& into, const GradSet& other, double factor = 1.0);

/// Copies parameter values out, or back in, as a flat list of tensors.
std::vector<ParamTensor> snapshot(std::span<const NamedParam> params);
void restore(std::span<const NamedParam> params, const std::vector<ParamTensor>& values);

}  // namespace flowpath
