#include "flowpath/coupling_flow.hpp"

#include <cmath>
#include <numbers>

#include "flowpath/errors.hpp"

namespace flowpath {

namespace {

bool finite(std::span<const double> v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

}  // namespace

CouplingUnit::CouplingUnit(std::vector<std::uint8_t> mask, DenseNet scale_net,
                           DenseNet translate_net, double clamp)
    : mask_(std::move(mask)),
      scale_net_(std::move(scale_net)),
      translate_net_(std::move(translate_net)),
      clamp_(clamp) {
  for (std::size_t i = 0; i < mask_.size(); ++i) {
    if (mask_[i] > 1) throw ShapeError("coupling mask must be binary");
    (mask_[i] ? kept_ : transformed_).push_back(i);
  }
  if (kept_.empty() || transformed_.empty()) {
    throw ShapeError("coupling mask needs at least one kept and one transformed dimension");
  }
  for (const DenseNet* net : {&scale_net_, &translate_net_}) {
    if (net->in_dim() != kept_.size() || net->out_dim() != transformed_.size()) {
      throw ShapeError("coupling subnet must map " + std::to_string(kept_.size()) + " -> " +
                       std::to_string(transformed_.size()) + " dimensions");
    }
  }
  if (clamp_ < 0.0) throw ValidationError("coupling clamp must be non-negative");
}

CouplingUnit CouplingUnit::create(std::size_t dim, std::size_t parity, std::size_t hidden,
                                  double clamp, Rng& rng) {
  if (dim < 2) throw ShapeError("coupling flows need at least two dimensions");
  std::vector<std::uint8_t> mask(dim);
  for (std::size_t i = 0; i < dim; ++i) mask[i] = (i % 2 == parity % 2) ? 1 : 0;
  const std::size_t kept = (dim + (parity % 2 == 0 ? 1 : 0)) / 2;
  const std::size_t dims[] = {kept, hidden, hidden, dim - kept};
  DenseNet s = DenseNet::glorot(dims, Activation::tanh, Activation::identity, rng);
  DenseNet t = DenseNet::glorot(dims, Activation::tanh, Activation::identity, rng);
  s.zero_output_layer();
  t.zero_output_layer();
  return CouplingUnit(std::move(mask), std::move(s), std::move(t), clamp);
}

std::vector<double> CouplingUnit::gather(std::span<const double> v) const {
  std::vector<double> out(kept_.size());
  for (std::size_t i = 0; i < kept_.size(); ++i) out[i] = v[kept_[i]];
  return out;
}

double CouplingUnit::squash(double raw) const {
  return clamp_ > 0.0 ? clamp_ * std::tanh(raw / clamp_) : raw;
}

CouplingUnit::Output CouplingUnit::forward(std::span<const double> x) const {
  if (x.size() != dim()) {
    throw ShapeError("coupling unit expects " + std::to_string(dim()) + " values, got " +
                     std::to_string(x.size()));
  }
  const auto xk = gather(x);
  const auto raw = scale_net_.forward(xk);
  const auto shift = translate_net_.forward(xk);
  Output out{std::vector<double>(x.begin(), x.end()), 0.0};
  for (std::size_t i = 0; i < transformed_.size(); ++i) {
    const double s = squash(raw[i]);
    const std::size_t d = transformed_[i];
    out.y[d] = x[d] * std::exp(s) + shift[i];
    out.logdet += s;
  }
  if (!finite(out.y) || !std::isfinite(out.logdet)) {
    throw NumericError("coupling unit forward overflowed");
  }
  return out;
}

std::vector<double> CouplingUnit::inverse(std::span<const double> y) const {
  if (y.size() != dim()) {
    throw ShapeError("coupling unit expects " + std::to_string(dim()) + " values, got " +
                     std::to_string(y.size()));
  }
  const auto yk = gather(y);
  const auto raw = scale_net_.forward(yk);
  const auto shift = translate_net_.forward(yk);
  std::vector<double> x(y.begin(), y.end());
  for (std::size_t i = 0; i < transformed_.size(); ++i) {
    const std::size_t d = transformed_[i];
    x[d] = (y[d] - shift[i]) * std::exp(-squash(raw[i]));
  }
  if (!finite(x)) throw NumericError("coupling unit inverse overflowed");
  return x;
}

std::vector<double> CouplingUnit::backward(std::span<const double> x,
                                           std::span<const double> grad_y, double grad_logdet,
                                           std::span<ParamTensor> grads) const {
  if (x.size() != dim() || grad_y.size() != dim()) throw ShapeError("coupling backward: size");
  const auto xk = gather(x);
  const auto s_trace = scale_net_.forward_trace(xk);
  const auto t_trace = translate_net_.forward_trace(xk);
  const auto raw = s_trace.output();

  std::vector<double> gx(grad_y.begin(), grad_y.end());
  std::vector<double> g_raw(transformed_.size());
  std::vector<double> g_shift(transformed_.size());
  for (std::size_t i = 0; i < transformed_.size(); ++i) {
    const std::size_t d = transformed_[i];
    const double s = squash(raw[i]);
    const double e = std::exp(s);
    gx[d] = grad_y[d] * e;
    const double g_s = grad_y[d] * x[d] * e + grad_logdet;
    double ds_draw = 1.0;
    if (clamp_ > 0.0) {
      const double th = std::tanh(raw[i] / clamp_);
      ds_draw = 1.0 - th * th;
    }
    g_raw[i] = g_s * ds_draw;
    g_shift[i] = grad_y[d];
  }
  const std::size_t ns = scale_net_.num_params();
  const auto gk_s = scale_net_.backward(s_trace, g_raw, grads.subspan(0, ns));
  const auto gk_t = translate_net_.backward(t_trace, g_shift, grads.subspan(ns));
  for (std::size_t i = 0; i < kept_.size(); ++i) gx[kept_[i]] += gk_s[i] + gk_t[i];
  return gx;
}

void CouplingUnit::append_params(const std::string& prefix, std::vector<NamedParam>& out) {
  scale_net_.append_params(prefix + ".scale", out);
  translate_net_.append_params(prefix + ".translate", out);
}

void CouplingUnit::append_zero_grads(GradSet& out) const {
  scale_net_.append_zero_grads(out);
  translate_net_.append_zero_grads(out);
}

BijectionStack::BijectionStack(std::vector<CouplingUnit> units) : units_(std::move(units)) {
  if (units_.empty()) throw ShapeError("bijection stack needs at least one unit");
  for (const auto& u : units_) {
    if (u.dim() != units_.front().dim()) throw ShapeError("coupling units differ in dimension");
  }
}

BijectionStack BijectionStack::create(const FlowConfig& config, Rng& rng) {
  if (config.units == 0 || config.hidden == 0) {
    throw ValidationError("flow needs at least one unit and a positive hidden width");
  }
  std::vector<CouplingUnit> units;
  units.reserve(config.units);
  for (std::size_t k = 0; k < config.units; ++k) {
    units.push_back(CouplingUnit::create(config.dim, k % 2, config.hidden, config.clamp, rng));
  }
  return BijectionStack(std::move(units));
}

BijectionStack::Output BijectionStack::forward(std::span<const double> x) const {
  Output out{std::vector<double>(x.begin(), x.end()), 0.0, {}};
  out.unit_logdets.reserve(units_.size());
  for (std::size_t k = 0; k < units_.size(); ++k) {
    auto step = units_[k].forward(out.z);
    out.z = std::move(step.y);
    out.unit_logdets.push_back(step.logdet);
    out.logdet += step.logdet;
  }
  return out;
}

std::vector<double> BijectionStack::inverse(std::span<const double> z) const {
  std::vector<double> x(z.begin(), z.end());
  for (std::size_t k = units_.size(); k-- > 0;) x = units_[k].inverse(x);
  return x;
}

std::vector<double> BijectionStack::backward(std::span<const double> x,
                                             std::span<const double> grad_z, double grad_logdet,
                                             std::span<ParamTensor> grads) const {
  std::vector<std::vector<double>> inputs;
  inputs.reserve(units_.size());
  inputs.emplace_back(x.begin(), x.end());
  for (std::size_t k = 0; k + 1 < units_.size(); ++k) {
    inputs.push_back(units_[k].forward(inputs.back()).y);
  }
  std::vector<std::size_t> offsets(units_.size());
  std::size_t offset = 0;
  for (std::size_t k = 0; k < units_.size(); ++k) {
    offsets[k] = offset;
    offset += units_[k].num_params();
  }
  if (grads.size() < offset) throw ShapeError("flow backward: gradient buffer too small");

  std::vector<double> g(grad_z.begin(), grad_z.end());
  for (std::size_t k = units_.size(); k-- > 0;) {
    g = units_[k].backward(inputs[k], g, grad_logdet,
                           grads.subspan(offsets[k], units_[k].num_params()));
  }
  return g;
}

std::size_t BijectionStack::num_params() const {
  std::size_t n = 0;
  for (const auto& u : units_) n += u.num_params();
  return n;
}

std::vector<NamedParam> BijectionStack::parameters(const std::string& prefix) {
  std::vector<NamedParam> out;
  append_params(prefix, out);
  return out;
}

void BijectionStack::append_params(const std::string& prefix, std::vector<NamedParam>& out) {
  for (std::size_t k = 0; k < units_.size(); ++k) {
    units_[k].append_params(prefix + ".unit" + std::to_string(k), out);
  }
}

GradSet BijectionStack::zero_grads() const {
  GradSet out;
  for (const auto& u : units_) u.append_zero_grads(out);
  return out;
}

double gaussian_loglik(std::span<const double> z, std::span<const double> mean,
                       std::span<const double> diag_variance) {
  if (z.size() != mean.size() || z.size() != diag_variance.size()) {
    throw ShapeError("gaussian_loglik: dimension mismatch");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double v = diag_variance[i];
    if (!(v > 0.0)) throw DomainError("gaussian_loglik: variances must be strictly positive");
    const double d = z[i] - mean[i];
    acc += std::log(2.0 * std::numbers::pi * v) + d * d / v;
  }
  return -0.5 * acc;
}

double standard_normal_loglik(std::span<const double> z) {
  double sq = 0.0;
  for (double v : z) sq += v * v;
  return -0.5 * (static_cast<double>(z.size()) * std::log(2.0 * std::numbers::pi) + sq);
}

double flow_log_density(const BijectionStack& flow, std::span<const double> x) {
  const auto out = flow.forward(x);
  return standard_normal_loglik(out.z) + out.logdet;
}

LossAndGrad flow_nll(const BijectionStack& flow, std::span<const Observation> batch) {
  if (batch.empty()) throw InsufficientDataError("flow_nll: empty batch");
  LossAndGrad out{0.0, flow.zero_grads()};
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  for (const auto& x : batch) {
    const auto fwd = flow.forward(x);
    out.loss -= (standard_normal_loglik(fwd.z) + fwd.logdet) * inv_n;
    // d(-log N(z; 0, I))/dz = z; d(-logdet)/dlogdet = -1.
    std::vector<double> gz(fwd.z.size());
    for (std::size_t i = 0; i < gz.size(); ++i) gz[i] = fwd.z[i] * inv_n;
    flow.backward(x, gz, -inv_n, out.grads);
  }
  if (!std::isfinite(out.loss)) throw NumericError("flow_nll: non-finite loss");
  return out;
}

}  // namespace flowpath
