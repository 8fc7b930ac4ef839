#include "flowpath/age_transform.hpp"

#include <cmath>
#include <numbers>

#include "flowpath/errors.hpp"

namespace flowpath {

AgeAction::AgeAction(int index, int count) : index_(index), count_(count) {
  if (count < 1) throw DomainError("action space must be non-empty");
  if (index < 0 || index >= count) {
    throw DomainError("action index " + std::to_string(index) + " outside [0, " +
                      std::to_string(count) + ")");
  }
}

AgeAction AgeAction::from_one_hot(std::span<const double> one_hot) {
  int hot = -1;
  for (std::size_t i = 0; i < one_hot.size(); ++i) {
    if (one_hot[i] == 1.0 && hot < 0) {
      hot = static_cast<int>(i);
    } else if (one_hot[i] != 0.0) {
      throw DomainError("controller vector is not one-hot");
    }
  }
  if (hot < 0) throw DomainError("controller vector is not one-hot");
  return AgeAction(hot, static_cast<int>(one_hot.size()));
}

std::vector<double> AgeAction::one_hot() const {
  std::vector<double> v(static_cast<std::size_t>(count_), 0.0);
  v[static_cast<std::size_t>(index_)] = 1.0;
  return v;
}

FactoredTransform FactoredTransform::zeros(std::size_t dim, std::size_t factors,
                                           std::size_t actions) {
  return FactoredTransform{ParamTensor({dim, factors}), ParamTensor({factors, dim}),
                           ParamTensor({factors, actions}), ParamTensor({dim})};
}

FactoredTransform FactoredTransform::create(std::size_t dim, std::size_t factors,
                                            std::size_t actions, Rng& rng) {
  auto g = zeros(dim, factors, actions);
  const double s = 0.1 * std::sqrt(6.0 / static_cast<double>(dim + factors));
  for (double& v : g.w.values) v = rng.uniform(-s, s);
  for (double& v : g.w_z.values) v = rng.uniform(-s, s);
  for (std::size_t i = 0; i < std::min(dim, factors); ++i) {
    g.w.at(i, i) += 1.0;
    g.w_z.at(i, i) += 1.0;
  }
  for (double& v : g.w_a.values) v = 1.0 + 0.01 * rng.normal();
  return g;
}

void FactoredTransform::validate() const {
  const std::size_t d = w.rows();
  const std::size_t f = w.cols();
  if (w.shape.size() != 2 || w_z.shape != std::vector<std::size_t>{f, d} ||
      w_a.shape.size() != 2 || w_a.rows() != f || b.shape != std::vector<std::size_t>{d}) {
    throw ShapeError("factored transform dimensions do not chain: W " + shape_string(w.shape) +
                     ", W_z " + shape_string(w_z.shape) + ", W_a " + shape_string(w_a.shape) +
                     ", b " + shape_string(b.shape));
  }
  if (!w.all_finite() || !w_z.all_finite() || !w_a.all_finite() || !b.all_finite()) {
    throw NumericError("factored transform has non-finite entries");
  }
}

void FactoredTransform::append_params(const std::string& prefix, std::vector<NamedParam>& out) {
  out.push_back({prefix + ".W", &w});
  out.push_back({prefix + ".W_z", &w_z});
  out.push_back({prefix + ".W_a", &w_a});
  out.push_back({prefix + ".b", &b});
}

void FactoredTransform::append_zero_grads(GradSet& out) const {
  out.emplace_back(w.shape);
  out.emplace_back(w_z.shape);
  out.emplace_back(w_a.shape);
  out.emplace_back(b.shape);
}

namespace {

void check_action(const FactoredTransform& g, std::span<const double> z, const AgeAction& a) {
  if (z.size() != g.dim()) {
    throw ShapeError("transform expects a latent of size " + std::to_string(g.dim()) + ", got " +
                     std::to_string(z.size()));
  }
  if (static_cast<std::size_t>(a.count()) != g.num_actions()) {
    throw ShapeError("controller has " + std::to_string(a.count()) +
                     " entries, transform expects " + std::to_string(g.num_actions()));
  }
}

// h = W_z z (length f)
std::vector<double> project(const FactoredTransform& g, std::span<const double> z) {
  const std::size_t f = g.factors();
  const std::size_t d = g.dim();
  std::vector<double> h(f, 0.0);
  for (std::size_t m = 0; m < f; ++m) {
    double acc = 0.0;
    for (std::size_t j = 0; j < d; ++j) acc += g.w_z.at(m, j) * z[j];
    h[m] = acc;
  }
  return h;
}

}  // namespace

std::vector<double> transform_apply(const FactoredTransform& g, std::span<const double> z_prev,
                                    const AgeAction& a) {
  check_action(g, z_prev, a);
  const std::size_t f = g.factors();
  const std::size_t d = g.dim();
  const auto k = static_cast<std::size_t>(a.index());
  auto h = project(g, z_prev);
  // A one-hot controller selects column k of W_a.
  for (std::size_t m = 0; m < f; ++m) h[m] *= g.w_a.at(m, k);
  std::vector<double> out(d);
  for (std::size_t i = 0; i < d; ++i) {
    double acc = 0.0;
    for (std::size_t m = 0; m < f; ++m) acc += g.w.at(i, m) * h[m];
    out[i] = acc + g.b[i];
  }
  return out;
}

std::vector<double> transform_apply(const FactoredTransform& g, std::span<const double> z_prev,
                                    std::span<const double> a_one_hot) {
  return transform_apply(g, z_prev, AgeAction::from_one_hot(a_one_hot));
}

std::vector<double> transform_backward(const FactoredTransform& g, std::span<const double> z_prev,
                                       const AgeAction& a, std::span<const double> grad_g,
                                       std::span<ParamTensor> grads) {
  check_action(g, z_prev, a);
  if (grad_g.size() != g.dim() || grads.size() < FactoredTransform::kNumParams) {
    throw ShapeError("transform_backward: gradient size mismatch");
  }
  const std::size_t f = g.factors();
  const std::size_t d = g.dim();
  const auto k = static_cast<std::size_t>(a.index());
  const auto h = project(g, z_prev);
  std::vector<double> p(f);
  for (std::size_t m = 0; m < f; ++m) p[m] = h[m] * g.w_a.at(m, k);

  auto& gw = grads[0];
  auto& gwz = grads[1];
  auto& gwa = grads[2];
  auto& gb = grads[3];
  std::vector<double> gp(f, 0.0);
  for (std::size_t i = 0; i < d; ++i) {
    gb[i] += grad_g[i];
    for (std::size_t m = 0; m < f; ++m) {
      gw.at(i, m) += grad_g[i] * p[m];
      gp[m] += g.w.at(i, m) * grad_g[i];
    }
  }
  std::vector<double> gz(d, 0.0);
  for (std::size_t m = 0; m < f; ++m) {
    gwa.at(m, k) += gp[m] * h[m];
    const double gh = gp[m] * g.w_a.at(m, k);
    for (std::size_t j = 0; j < d; ++j) {
      gwz.at(m, j) += gh * z_prev[j];
      gz[j] += g.w_z.at(m, j) * gh;
    }
  }
  return gz;
}

AgingModel AgingModel::create(const FlowConfig& flow, std::size_t factors, Rng& rng) {
  if (factors == 0) throw ValidationError("factor count must be positive");
  AgingModel m{BijectionStack::create(flow, rng), BijectionStack::create(flow, rng),
               FactoredTransform::create(flow.dim, factors, kNumActions, rng)};
  return m;
}

std::vector<NamedParam> AgingModel::parameters() {
  std::vector<NamedParam> out;
  f1.append_params("theta1", out);
  f2.append_params("theta2", out);
  g.append_params("theta3", out);
  return out;
}

GradSet AgingModel::zero_grads() const {
  GradSet out = f1.zero_grads();
  for (auto& t : f2.zero_grads()) out.push_back(std::move(t));
  g.append_zero_grads(out);
  return out;
}

double pair_loglik(const AgingModel& model, std::span<const double> x_prev,
                   std::span<const double> x_t, const AgeAction& a) {
  if (x_prev.size() != model.dim() || x_t.size() != model.dim()) {
    throw ShapeError("pair_loglik: observations must have length " + std::to_string(model.dim()));
  }
  const auto z_prev = model.f1.forward(x_prev).z;
  const auto next = model.f2.forward(x_t);
  const auto g = transform_apply(model.g, z_prev, a);
  std::vector<double> residual(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) residual[i] = next.z[i] - g[i];
  const double ll = standard_normal_loglik(residual) + next.logdet;
  if (!std::isfinite(ll)) throw NumericError("pair_loglik: non-finite value");
  return ll;
}

double pair_loglik_backward(const AgingModel& model, std::span<const double> x_prev,
                            std::span<const double> x_t, const AgeAction& a, double weight,
                            GradSet& grads) {
  const std::size_t n1 = model.f1.num_params();
  const std::size_t n2 = model.f2.num_params();
  if (grads.size() != n1 + n2 + FactoredTransform::kNumParams) {
    throw ShapeError("pair_loglik_backward: gradient set does not match the model");
  }
  if (x_prev.size() != model.dim() || x_t.size() != model.dim()) {
    throw ShapeError("pair_loglik: observations must have length " + std::to_string(model.dim()));
  }
  const auto z_prev = model.f1.forward(x_prev).z;
  const auto next = model.f2.forward(x_t);
  const auto g = transform_apply(model.g, z_prev, a);
  std::vector<double> residual(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) residual[i] = next.z[i] - g[i];
  const double ll = standard_normal_loglik(residual) + next.logdet;
  if (!std::isfinite(ll)) throw NumericError("pair_loglik: non-finite value");

  // d ll / d z_t = -r, d ll / d g = r, d ll / d logdet = 1.
  std::vector<double> g_next(residual.size());
  std::vector<double> g_g(residual.size());
  for (std::size_t i = 0; i < residual.size(); ++i) {
    g_next[i] = -weight * residual[i];
    g_g[i] = weight * residual[i];
  }
  std::span<ParamTensor> all(grads);
  model.f2.backward(x_t, g_next, weight, all.subspan(n1, n2));
  const auto g_zprev = transform_backward(model.g, z_prev, a, g_g, all.subspan(n1 + n2));
  model.f1.backward(x_prev, g_zprev, 0.0, all.subspan(0, n1));
  return ll;
}

PenaltyResult controller_gaussian_penalty_grad(const ParamTensor& w_a,
                                               std::span<const AgeAction> actions) {
  if (actions.size() < 2) {
    throw InsufficientDataError("controller penalty needs at least two actions per batch");
  }
  if (w_a.shape.size() != 2) throw ShapeError("W_a must be a matrix");
  const std::size_t f = w_a.rows();
  const std::size_t na = w_a.cols();
  const double n = static_cast<double>(actions.size());
  for (const auto& a : actions) {
    if (static_cast<std::size_t>(a.count()) != na) throw ShapeError("controller size mismatch");
  }

  PenaltyResult out{0.0, ParamTensor(w_a.shape)};
  for (std::size_t m = 0; m < f; ++m) {
    double mean = 0.0;
    for (const auto& a : actions) mean += w_a.at(m, static_cast<std::size_t>(a.index()));
    mean /= n;
    double var = 0.0;
    for (const auto& a : actions) {
      const double d = w_a.at(m, static_cast<std::size_t>(a.index())) - mean;
      var += d * d;
    }
    var = std::max(var / n, kControllerVarianceFloor);
    double quad = 0.0;
    for (const auto& a : actions) {
      const auto k = static_cast<std::size_t>(a.index());
      const double d = w_a.at(m, k) - mean;
      quad += d * d / var;
      // Holds whether or not the floor is active; the mean term cancels.
      out.grad_w_a.at(m, k) -= d / (n * var);
    }
    out.value += -0.5 * (std::log(2.0 * std::numbers::pi * var) + quad / n);
  }
  return out;
}

double controller_gaussian_penalty(const ParamTensor& w_a, std::span<const AgeAction> actions) {
  return controller_gaussian_penalty_grad(w_a, actions).value;
}

GaussianMoments propagate_moments(const GaussianMoments& prev, const GaussianMoments& controller,
                                  std::span<const double> bar_mean, const FactoredTransform& g) {
  g.validate();
  const std::size_t d = g.dim();
  const std::size_t f = g.factors();
  if (prev.mean.size() != d || prev.covariance.rows != d || prev.covariance.cols != d ||
      controller.mean.size() != f || controller.covariance.rows != f ||
      controller.covariance.cols != f || bar_mean.size() != d) {
    throw ShapeError("propagate_moments: dimensions do not chain");
  }
  if (!(prev.covariance == prev.covariance.transposed())) {
    throw ValidationError("propagate_moments: previous covariance must be symmetric");
  }
  const Matrix w(d, f, g.w.values);
  const Matrix wz(f, d, g.w_z.values);
  const auto& mu_a = controller.mean;

  GaussianMoments out;
  const auto wz_mu = matvec(wz, prev.mean);
  std::vector<double> inner(f);
  for (std::size_t m = 0; m < f; ++m) inner[m] = wz_mu[m] * mu_a[m];
  out.mean = matvec(w, inner);
  for (std::size_t i = 0; i < d; ++i) out.mean[i] += g.b[i] + bar_mean[i];

  const Matrix lifted = matmul(matmul(wz, prev.covariance), wz.transposed());
  const Matrix bracket =
      hadamard(lifted, controller.covariance) - hadamard(outer(wz_mu, wz_mu), outer(mu_a, mu_a));
  const Matrix cov = matmul(matmul(w, bracket), w.transposed());
  out.covariance = Matrix(d, d);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) out.covariance(i, j) = 0.5 * (cov(i, j) + cov(j, i));
  }

  const std::vector<double> ones(d, 1.0);
  out.cross_covariance = matmul(w, hadamard(matmul(wz, prev.covariance), outer(mu_a, ones)));
  out.cross_covariance_back =
      matmul(hadamard(outer(ones, mu_a), matmul(prev.covariance, wz.transposed())),
             w.transposed());
  return out;
}

PairObjective pair_objective(const AgingModel& model, std::span<const PairSample> batch,
                             double lambda, bool with_grad) {
  if (batch.empty()) throw InsufficientDataError("pair objective: empty batch");
  if (lambda < 0.0) throw DomainError("pair objective: lambda must be non-negative");
  PairObjective out;
  if (with_grad) out.grads = model.zero_grads();
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& s = batch[i];
    try {
      const double ll =
          with_grad ? pair_loglik_backward(model, s.prev, s.next, s.action, -inv_n, out.grads)
                    : pair_loglik(model, s.prev, s.next, s.action);
      out.mean_loglik += ll * inv_n;
    } catch (const NumericError& e) {
      throw NumericError("pair sample " + std::to_string(i) + ": " + e.what());
    }
  }
  out.loss = -out.mean_loglik;
  if (lambda > 0.0) {
    std::vector<AgeAction> actions;
    actions.reserve(batch.size());
    for (const auto& s : batch) actions.push_back(s.action);
    auto pen = controller_gaussian_penalty_grad(model.g.w_a, actions);
    out.penalty = pen.value;
    out.loss -= lambda * pen.value;
    if (with_grad) {
      auto& gwa = out.grads[model.f1.num_params() + model.f2.num_params() + 2];
      for (std::size_t j = 0; j < gwa.size(); ++j) gwa[j] -= lambda * pen.grad_w_a[j];
    }
  }
  if (!std::isfinite(out.loss)) throw NumericError("pair objective: non-finite loss");
  return out;
}

PairObjective train_pair_step(AgingModel& model, std::span<const PairSample> batch,
                              OptimizerState& state, double lambda) {
  auto obj = pair_objective(model, batch, lambda, true);
  optimizer_step(model.parameters(), obj.grads, state);
  return obj;
}

Observation synthesize_step(const AgingModel& model, std::span<const double> x_prev,
                            const AgeAction& a, double noise_scale, Rng* rng) {
  if (noise_scale < 0.0) throw DomainError("noise_scale must be non-negative");
  auto z = transform_apply(model.g, model.f1.forward(x_prev).z, a);
  if (noise_scale > 0.0) {
    if (rng == nullptr) throw ValidationError("stochastic synthesis needs a generator");
    for (double& v : z) v += noise_scale * rng->normal();
  }
  return model.f2.inverse(z);
}

}  // namespace flowpath
