#include "flowpath/dense_net.hpp"

#include <cmath>
#include <limits>

#include "flowpath/errors.hpp"

namespace flowpath {

std::string to_string(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
    case Activation::softmax: return "softmax";
  }
  return "identity";
}

Activation activation_from_string(const std::string& name) {
  if (name == "identity") return Activation::identity;
  if (name == "relu") return Activation::relu;
  if (name == "tanh") return Activation::tanh;
  if (name == "softmax") return Activation::softmax;
  throw ValidationError("unknown activation '" + name + "'");
}

namespace {

void apply_activation(Activation act, std::vector<double>& v) {
  switch (act) {
    case Activation::identity:
      break;
    case Activation::relu:
      for (double& x : v) x = x > 0.0 ? x : 0.0;
      break;
    case Activation::tanh:
      for (double& x : v) x = std::tanh(x);
      break;
    case Activation::softmax: {
      double m = -std::numeric_limits<double>::infinity();
      for (double x : v) m = std::max(m, x);
      double total = 0.0;
      for (double& x : v) {
        x = std::exp(x - m);
        total += x;
      }
      for (double& x : v) x /= total;
      break;
    }
  }
}

// Gradient w.r.t. the pre-activation given the gradient w.r.t. the output.
std::vector<double> activation_backward(Activation act, std::span<const double> out,
                                        std::span<const double> grad_out) {
  std::vector<double> g(grad_out.begin(), grad_out.end());
  switch (act) {
    case Activation::identity:
      break;
    case Activation::relu:
      for (std::size_t i = 0; i < g.size(); ++i) g[i] = out[i] > 0.0 ? g[i] : 0.0;
      break;
    case Activation::tanh:
      for (std::size_t i = 0; i < g.size(); ++i) g[i] *= 1.0 - out[i] * out[i];
      break;
    case Activation::softmax: {
      double inner = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) inner += grad_out[i] * out[i];
      for (std::size_t i = 0; i < g.size(); ++i) g[i] = out[i] * (grad_out[i] - inner);
      break;
    }
  }
  return g;
}

bool all_finite(std::span<const double> v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

}  // namespace

DenseNet::DenseNet(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    const auto& l = layers_[k];
    if (l.weight.shape.size() != 2 || l.bias.shape.size() != 1 ||
        l.bias.shape[0] != l.weight.shape[0]) {
      throw ShapeError("layer " + std::to_string(k) + ": weight " + shape_string(l.weight.shape) +
                       " and bias " + shape_string(l.bias.shape) + " are inconsistent");
    }
    if (k > 0 && layers_[k - 1].out_dim() != l.in_dim()) {
      throw ShapeError("layer " + std::to_string(k) + " expects " + std::to_string(l.in_dim()) +
                       " inputs but previous layer emits " +
                       std::to_string(layers_[k - 1].out_dim()));
    }
    if (l.activation == Activation::softmax && k + 1 != layers_.size()) {
      throw ShapeError("softmax is only allowed as the final activation");
    }
  }
}

DenseNet DenseNet::glorot(std::span<const std::size_t> dims, Activation hidden, Activation output,
                          Rng& rng) {
  if (dims.size() < 2) throw ShapeError("a dense net needs at least an input and output width");
  std::vector<DenseLayer> layers;
  for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
    const std::size_t in = dims[k];
    const std::size_t out = dims[k + 1];
    DenseLayer layer{ParamTensor({out, in}), ParamTensor({out}),
                     k + 2 == dims.size() ? output : hidden};
    const double s = std::sqrt(6.0 / static_cast<double>(in + out));
    for (double& w : layer.weight.values) w = rng.uniform(-s, s);
    layers.push_back(std::move(layer));
  }
  return DenseNet(std::move(layers));
}

std::size_t DenseNet::in_dim() const { return layers_.empty() ? 0 : layers_.front().in_dim(); }
std::size_t DenseNet::out_dim() const { return layers_.empty() ? 0 : layers_.back().out_dim(); }

DenseNet::Trace DenseNet::forward_trace(std::span<const double> input) const {
  if (layers_.empty()) throw ShapeError("empty network");
  if (input.size() != in_dim()) {
    throw ShapeError("input has " + std::to_string(input.size()) + " values, network expects " +
                     std::to_string(in_dim()));
  }
  Trace trace;
  trace.activations.reserve(layers_.size() + 1);
  trace.activations.emplace_back(input.begin(), input.end());
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    const auto& l = layers_[k];
    const auto& x = trace.activations.back();
    const std::size_t in = l.in_dim();
    std::vector<double> y(l.out_dim());
    for (std::size_t o = 0; o < y.size(); ++o) {
      const double* w = l.weight.values.data() + o * in;
      double acc = l.bias[o];
      for (std::size_t i = 0; i < in; ++i) acc += w[i] * x[i];
      y[o] = acc;
    }
    apply_activation(l.activation, y);
    if (!all_finite(y)) {
      throw NumericError("non-finite activation in layer " + std::to_string(k));
    }
    trace.activations.push_back(std::move(y));
  }
  return trace;
}

std::vector<double> DenseNet::forward(std::span<const double> input) const {
  return std::move(forward_trace(input).activations.back());
}

std::vector<double> DenseNet::backward(const Trace& trace, std::span<const double> upstream,
                                       std::span<ParamTensor> grads) const {
  if (trace.activations.size() != layers_.size() + 1) {
    throw ShapeError("trace does not belong to this network");
  }
  if (upstream.size() != out_dim()) {
    throw ShapeError("upstream gradient has " + std::to_string(upstream.size()) +
                     " values, network emits " + std::to_string(out_dim()));
  }
  if (grads.size() < num_params()) throw ShapeError("gradient buffer too small");

  std::vector<double> g(upstream.begin(), upstream.end());
  for (std::size_t k = layers_.size(); k-- > 0;) {
    const auto& l = layers_[k];
    const auto& x = trace.activations[k];
    const std::vector<double> gz = activation_backward(l.activation, trace.activations[k + 1], g);
    if (!all_finite(gz)) {
      throw NumericError("non-finite gradient in layer " + std::to_string(k));
    }
    auto& gw = grads[2 * k];
    auto& gb = grads[2 * k + 1];
    const std::size_t in = l.in_dim();
    std::vector<double> gx(in, 0.0);
    for (std::size_t o = 0; o < gz.size(); ++o) {
      const double d = gz[o];
      gb[o] += d;
      if (d == 0.0) continue;
      double* gwr = gw.values.data() + o * in;
      const double* w = l.weight.values.data() + o * in;
      for (std::size_t i = 0; i < in; ++i) {
        gwr[i] += d * x[i];
        gx[i] += d * w[i];
      }
    }
    g = std::move(gx);
  }
  return g;
}

void DenseNet::append_params(const std::string& prefix, std::vector<NamedParam>& out) {
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    out.push_back({prefix + ".l" + std::to_string(k) + ".weight", &layers_[k].weight});
    out.push_back({prefix + ".l" + std::to_string(k) + ".bias", &layers_[k].bias});
  }
}

void DenseNet::append_zero_grads(GradSet& out) const {
  for (const auto& l : layers_) {
    out.emplace_back(l.weight.shape);
    out.emplace_back(l.bias.shape);
  }
}

void DenseNet::zero_output_layer() {
  if (layers_.empty()) return;
  layers_.back().weight.fill(0.0);
  layers_.back().bias.fill(0.0);
}

bool operator==(const DenseNet& a, const DenseNet& b) {
  if (a.layers_.size() != b.layers_.size()) return false;
  for (std::size_t k = 0; k < a.layers_.size(); ++k) {
    const auto& x = a.layers_[k];
    const auto& y = b.layers_[k];
    if (x.activation != y.activation || !(x.weight == y.weight) || !(x.bias == y.bias)) {
      return false;
    }
  }
  return true;
}

std::vector<double> net_forward(const DenseNet& net, std::span<const double> input) {
  return net.forward(input);
}

NetGradient net_backward(const DenseNet& net, std::span<const double> input,
                         std::span<const double> upstream) {
  NetGradient out;
  net.append_zero_grads(out.params);
  const auto trace = net.forward_trace(input);
  out.input = net.backward(trace, upstream, out.params);
  return out;
}

}  // namespace flowpath
