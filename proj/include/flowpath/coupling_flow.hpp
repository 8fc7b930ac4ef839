#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "flowpath/dense_net.hpp"
#include "flowpath/rng.hpp"
#include "flowpath/tensor.hpp"

namespace flowpath {

struct FlowConfig {
  std::size_t dim = 16;
  std::size_t units = 10;
  std::size_t hidden = 32;
  /// Scale outputs are squashed to clamp * tanh(raw / clamp); 0 disables it.
  double clamp = 2.0;

  friend bool operator==(const FlowConfig&, const FlowConfig&) = default;
};

/// Affine coupling layer. Dimensions with mask 1 are copied; the others are
/// scaled and shifted by functions of the copied ones:
///   y_t = x_t * exp(s(x_k)) + t(x_k),   log|det J| = sum(s(x_k)).
class CouplingUnit {
 public:
  struct Output {
    std::vector<double> y;
    double logdet = 0.0;
  };

  CouplingUnit(std::vector<std::uint8_t> mask, DenseNet scale_net, DenseNet translate_net,
               double clamp);

  /// Alternating mask (kept where index % 2 == parity) with tanh subnets of
  /// two hidden layers whose output layers start at zero, so the new unit is
  /// the identity.
  static CouplingUnit create(std::size_t dim, std::size_t parity, std::size_t hidden,
                             double clamp, Rng& rng);

  std::size_t dim() const { return mask_.size(); }
  const std::vector<std::uint8_t>& mask() const { return mask_; }
  const std::vector<std::size_t>& kept() const { return kept_; }
  const std::vector<std::size_t>& transformed() const { return transformed_; }
  const DenseNet& scale_net() const { return scale_net_; }
  const DenseNet& translate_net() const { return translate_net_; }
  DenseNet& scale_net() { return scale_net_; }
  DenseNet& translate_net() { return translate_net_; }
  double clamp() const { return clamp_; }

  Output forward(std::span<const double> x) const;
  std::vector<double> inverse(std::span<const double> y) const;

  /// Adds d(loss)/d(params) into grads[0 .. num_params()) for a loss with
  /// gradients grad_y w.r.t. y and grad_logdet w.r.t. logdet, and returns
  /// d(loss)/dx.
  std::vector<double> backward(std::span<const double> x, std::span<const double> grad_y,
                               double grad_logdet, std::span<ParamTensor> grads) const;

  std::size_t num_params() const { return scale_net_.num_params() + translate_net_.num_params(); }
  void append_params(const std::string& prefix, std::vector<NamedParam>& out);
  void append_zero_grads(GradSet& out) const;

 private:
  std::vector<double> gather(std::span<const double> v) const;
  double squash(double raw) const;

  std::vector<std::uint8_t> mask_;
  std::vector<std::size_t> kept_;
  std::vector<std::size_t> transformed_;
  DenseNet scale_net_;
  DenseNet translate_net_;
  double clamp_ = 0.0;
};

/// Invertible observation-to-latent map built from coupling units.
class BijectionStack {
 public:
  struct Output {
    std::vector<double> z;
    double logdet = 0.0;
    std::vector<double> unit_logdets;
  };

  BijectionStack() = default;
  explicit BijectionStack(std::vector<CouplingUnit> units);
  static BijectionStack create(const FlowConfig& config, Rng& rng);

  std::size_t dim() const { return units_.empty() ? 0 : units_.front().dim(); }
  std::size_t num_units() const { return units_.size(); }
  const std::vector<CouplingUnit>& units() const { return units_; }
  CouplingUnit& unit(std::size_t k) { return units_[k]; }

  Output forward(std::span<const double> x) const;
  std::vector<double> inverse(std::span<const double> z) const;
  std::vector<double> backward(std::span<const double> x, std::span<const double> grad_z,
                               double grad_logdet, std::span<ParamTensor> grads) const;

  std::size_t num_params() const;
  std::vector<NamedParam> parameters(const std::string& prefix);
  void append_params(const std::string& prefix, std::vector<NamedParam>& out);
  GradSet zero_grads() const;

 private:
  std::vector<CouplingUnit> units_;
};

/// Log-density of a diagonal Gaussian.
double gaussian_loglik(std::span<const double> z, std::span<const double> mean,
                       std::span<const double> diag_variance);
/// Log-density under N(0, I).
double standard_normal_loglik(std::span<const double> z);

struct LossAndGrad {
  double loss = 0.0;
  GradSet grads;
};

/// Mean negative log-likelihood of the batch under a standard-normal prior
/// pushed through the stack, with gradients aligned to stack.parameters().
LossAndGrad flow_nll(const BijectionStack& flow, std::span<const Observation> batch);
double flow_log_density(const BijectionStack& flow, std::span<const double> x);

}  // namespace flowpath
