#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "flowpath/rng.hpp"
#include "flowpath/tensor.hpp"

namespace flowpath {

enum class Activation { identity, relu, tanh, softmax };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& name);

struct DenseLayer {
  ParamTensor weight;  // [out x in]
  ParamTensor bias;    // [out]
  Activation activation = Activation::identity;

  std::size_t in_dim() const { return weight.cols(); }
  std::size_t out_dim() const { return weight.rows(); }
};

/// Fully connected feed-forward network with hand-written reverse mode.
///
/// Parameters are laid out as (weight, bias) per layer, in layer order; every
/// gradient routine uses the same order.
class DenseNet {
 public:
  /// Per-layer outputs of one forward pass. activations[0] is the input,
  /// activations[k + 1] the post-activation output of layer k.
  struct Trace {
    std::vector<std::vector<double>> activations;
    std::span<const double> output() const { return activations.back(); }
  };

  DenseNet() = default;
  /// Throws ShapeError when layer dimensions do not chain or softmax is not
  /// the final activation.
  explicit DenseNet(std::vector<DenseLayer> layers);

  /// Layer widths dims[0] -> dims[1] -> ... with Glorot-uniform weights and
  /// zero biases. `hidden` is used on every layer but the last.
  static DenseNet glorot(std::span<const std::size_t> dims, Activation hidden, Activation output,
                         Rng& rng);

  std::size_t in_dim() const;
  std::size_t out_dim() const;
  std::size_t num_layers() const { return layers_.size(); }
  const std::vector<DenseLayer>& layers() const { return layers_; }
  DenseLayer& layer(std::size_t k) { return layers_[k]; }
  std::size_t num_params() const { return 2 * layers_.size(); }

  std::vector<double> forward(std::span<const double> input) const;
  Trace forward_trace(std::span<const double> input) const;

  /// Reverse pass for the scalar loss whose gradient w.r.t. the output is
  /// `upstream`. Parameter gradients are added into grads[0 .. num_params());
  /// returns the gradient w.r.t. the input.
  std::vector<double> backward(const Trace& trace, std::span<const double> upstream,
                               std::span<ParamTensor> grads) const;

  void append_params(const std::string& prefix, std::vector<NamedParam>& out);
  void append_zero_grads(GradSet& out) const;
  /// Sets the final layer's weight and bias to exactly zero.
  void zero_output_layer();

  friend bool operator==(const DenseNet& a, const DenseNet& b);

 private:
  std::vector<DenseLayer> layers_;
};

struct NetGradient {
  GradSet params;
  std::vector<double> input;
};

std::vector<double> net_forward(const DenseNet& net, std::span<const double> input);
NetGradient net_backward(const DenseNet& net, std::span<const double> input,
                         std::span<const double> upstream);

}  // namespace flowpath
