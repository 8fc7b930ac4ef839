#pragma once

#include <compare>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "flowpath/coupling_flow.hpp"
#include "flowpath/linalg.hpp"
#include "flowpath/optimizer.hpp"
#include "flowpath/rng.hpp"
#include "flowpath/tensor.hpp"

namespace flowpath {

/// Number of age-step controllers: steps of 0..15 age units.
inline constexpr int kNumActions = 16;
/// Lower bound on controller batch variances.
inline constexpr double kControllerVarianceFloor = 1e-6;

/// One-hot age controller. Index k advances the age by k units.
class AgeAction {
 public:
  explicit AgeAction(int index, int count = kNumActions);
  /// Throws DomainError unless exactly one entry is 1 and the rest are 0.
  static AgeAction from_one_hot(std::span<const double> one_hot);

  int index() const { return index_; }
  int count() const { return count_; }
  std::vector<double> one_hot() const;

  friend auto operator<=>(const AgeAction&, const AgeAction&) = default;

 private:
  int index_ = 0;
  int count_ = kNumActions;
};

/// Aging transformation g = W (W_z z ⊙ W_a a) + b, the factored form of a
/// 3-way tensor interaction between latent, controller and output.
struct FactoredTransform {
  ParamTensor w;    // [D x f]
  ParamTensor w_z;  // [f x D]
  ParamTensor w_a;  // [f x N_a]
  ParamTensor b;    // [D]

  /// Near-identity start: W and W_z hold the leading identity block plus
  /// small Glorot noise, controller columns start near one, b = 0.
  static FactoredTransform create(std::size_t dim, std::size_t factors, std::size_t actions,
                                  Rng& rng);
  static FactoredTransform zeros(std::size_t dim, std::size_t factors, std::size_t actions);

  std::size_t dim() const { return w.rows(); }
  std::size_t factors() const { return w.cols(); }
  std::size_t num_actions() const { return w_a.cols(); }
  void validate() const;

  void append_params(const std::string& prefix, std::vector<NamedParam>& out);
  void append_zero_grads(GradSet& out) const;
  static constexpr std::size_t kNumParams = 4;
};

std::vector<double> transform_apply(const FactoredTransform& g, std::span<const double> z_prev,
                                    const AgeAction& a);
/// Same, with the controller given as a raw vector that must be one-hot.
std::vector<double> transform_apply(const FactoredTransform& g, std::span<const double> z_prev,
                                    std::span<const double> a_one_hot);
/// Adds d(loss)/d(W, W_z, W_a, b) into grads[0..4) and returns d(loss)/dz_prev.
std::vector<double> transform_backward(const FactoredTransform& g, std::span<const double> z_prev,
                                       const AgeAction& a, std::span<const double> grad_g,
                                       std::span<ParamTensor> grads);

/// F1 (previous observation), F2 (next observation) and G, with parameter
/// groups theta1, theta2 and theta3 in that order.
struct AgingModel {
  BijectionStack f1;
  BijectionStack f2;
  FactoredTransform g;

  static AgingModel create(const FlowConfig& flow, std::size_t factors, Rng& rng);

  std::size_t dim() const { return f2.dim(); }
  std::vector<NamedParam> parameters();
  GradSet zero_grads() const;
};

/// log p(x_t | x_prev, a) = log N(F2(x_t) - G(F1(x_prev), a); 0, I) + log|dF2/dx_t|.
double pair_loglik(const AgingModel& model, std::span<const double> x_prev,
                   std::span<const double> x_t, const AgeAction& a);
/// Adds weight * d(pair_loglik)/d(theta) into grads (aligned with
/// model.parameters()) and returns pair_loglik.
double pair_loglik_backward(const AgingModel& model, std::span<const double> x_prev,
                            std::span<const double> x_t, const AgeAction& a, double weight,
                            GradSet& grads);

struct PenaltyResult {
  double value = 0.0;
  ParamTensor grad_w_a;  // d(value)/d(W_a)
};

/// Mean log-likelihood of the controller latents z_a = W_a a under their own
/// batch mean and (floored, population) diagonal variance.
double controller_gaussian_penalty(const ParamTensor& w_a, std::span<const AgeAction> actions);
PenaltyResult controller_gaussian_penalty_grad(const ParamTensor& w_a,
                                               std::span<const AgeAction> actions);

struct GaussianMoments {
  std::vector<double> mean;
  Matrix covariance;
  Matrix cross_covariance;       // Σ^{t,t-1}; empty when not propagated
  Matrix cross_covariance_back;  // Σ^{t-1,t}
};

/// Mean, covariance and cross-covariances of z^t = W (W_z z^{t-1} ⊙ z_a) + b + z̄^t
/// following the closed forms of the joint-Gaussian aging model as stated.
/// The covariance expression is not guaranteed positive semi-definite.
GaussianMoments propagate_moments(const GaussianMoments& prev, const GaussianMoments& controller,
                                  std::span<const double> bar_mean, const FactoredTransform& g);

struct PairSample {
  Observation prev;
  Observation next;
  AgeAction action;
};

struct PairObjective {
  double loss = 0.0;
  double mean_loglik = 0.0;
  double penalty = 0.0;
  GradSet grads;
};

/// loss = -mean pair_loglik - lambda * controller_gaussian_penalty. The
/// penalty term is skipped entirely when lambda == 0.
PairObjective pair_objective(const AgingModel& model, std::span<const PairSample> batch,
                             double lambda, bool with_grad = true);

/// Evaluates the objective, applies one optimizer step and returns the
/// objective as it was before the step.
PairObjective train_pair_step(AgingModel& model, std::span<const PairSample> batch,
                              OptimizerState& state, double lambda);

/// x_t = F2^{-1}(G(F1(x_prev), a) + noise_scale * eps), eps ~ N(0, I).
/// `rng` may be null when noise_scale == 0.
Observation synthesize_step(const AgingModel& model, std::span<const double> x_prev,
                            const AgeAction& a, double noise_scale = 0.0, Rng* rng = nullptr);

}  // namespace flowpath
