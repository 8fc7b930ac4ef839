#include "flowpath/tensor.hpp"

#include <cmath>
#include <functional>
#include <numeric>

#include "flowpath/errors.hpp"

namespace flowpath {

std::size_t shape_product(std::span<const std::size_t> shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(std::span<const std::size_t> shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) out += "x";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

ParamTensor::ParamTensor(std::vector<std::size_t> shape_)
    : shape(std::move(shape_)), values(shape_product(shape), 0.0) {}

ParamTensor::ParamTensor(std::vector<std::size_t> shape_, std::vector<double> values_)
    : shape(std::move(shape_)), values(std::move(values_)) {
  if (shape_product(shape) != values.size()) {
    throw ShapeError("tensor shape " + shape_string(shape) + " does not match " +
                     std::to_string(values.size()) + " values");
  }
}

bool ParamTensor::all_finite() const {
  for (double v : values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void ParamTensor::fill(double v) { std::fill(values.begin(), values.end(), v); }

GradSet zeros_like(std::span<const NamedParam> params) {
  GradSet out;
  out.reserve(params.size());
  for (const auto& p : params) out.emplace_back(p.tensor->shape);
  return out;
}

void scale_grads(GradSet& grads, double factor) {
  for (auto& g : grads) {
    for (double& v : g.values) v *= factor;
  }
}

void add_grads(GradSet& into, const GradSet& other, double factor) {
  if (into.size() != other.size()) throw ShapeError("gradient sets differ in length");
  for (std::size_t i = 0; i < into.size(); ++i) {
    if (into[i].shape != other[i].shape) throw ShapeError("gradient shapes differ");
    for (std::size_t j = 0; j < into[i].size(); ++j) into[i][j] += factor * other[i][j];
  }
}

std::vector<ParamTensor> snapshot(std::span<const NamedParam> params) {
  std::vector<ParamTensor> out;
  out.reserve(params.size());
  for (const auto& p : params) out.push_back(*p.tensor);
  return out;
}

void restore(std::span<const NamedParam> params, const std::vector<ParamTensor>& values) {
  if (params.size() != values.size()) throw ShapeError("snapshot size mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].tensor->shape != values[i].shape) {
      throw ShapeError("snapshot shape mismatch for " + params[i].name);
    }
    *params[i].tensor = values[i];
  }
}

}  // namespace flowpath
