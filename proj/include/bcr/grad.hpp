#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bcr/layers.hpp"
#include "bcr/tensor.hpp"

namespace bcr::grad {

struct Param {
  std::string name;
  std::vector<double> value;
  bool trainable = true;
};

/// Ordered named parameters. Names are unique.
class ParamStore {
 public:
  void add(std::string name, std::vector<double> value, bool trainable = true);
  std::size_t size() const { return params_.size(); }
  Param& operator[](std::size_t i) { return params_[i]; }
  const Param& operator[](std::size_t i) const { return params_[i]; }
  const Param* find(const std::string& name) const;
  std::size_t scalar_count() const;
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

 private:
  std::vector<Param> params_;
};

/// Gradients aligned one-to-one with a ParamStore.
using Gradients = std::vector<std::vector<double>>;

Gradients zero_gradients(const ParamStore& params);

/// Parameter gradients of one layer, shaped like its weights and bias.
struct LayerGrad {
  std::vector<double> weights;
  std::vector<double> bias;

  static LayerGrad zeros_like(const layers::LayerSpec& spec);
};

/// Backward pass of layer_forward. x is the recorded input, y the recorded
/// output (after the activation) and dy the upstream gradient. Parameter
/// gradients are added into `acc` when non-null; returns dL/dx.
Tensor layer_backward(const Tensor& x, const Tensor& y, const Tensor& dy,
                      const layers::LayerSpec& spec, LayerGrad* acc);

/// dL/dz from dL/dy given y = act(z). The relu derivative at 0 is 0.
Tensor activation_backward(layers::Activation act, const Tensor& y, const Tensor& dy);

/// Interleave is a permutation, so its backward is the inverse permutation.
Tensor interleave_backward(const Tensor& dy, int factor);

struct Loss {
  double value = 0.0;
  Tensor grad;
};

/// Mean squared error over all entries; grad = 2 (pred - target) / count.
Loss mse_loss(const Tensor& pred, const Tensor& target);

/// A plain chain of layers with an optional interleave after each one.
struct Sequential {
  std::vector<layers::LayerSpec> layers;
  std::vector<int> interleave_after;  // factor per layer, 0 for none

  void push(layers::LayerSpec spec, int interleave_factor = 0);
  /// trace receives the input followed by every layer output (pre-interleave).
  Tensor forward(const Tensor& x, std::vector<Tensor>* trace = nullptr) const;
  /// Returns dL/dx; grads must hold one LayerGrad per layer.
  Tensor backward(const std::vector<Tensor>& trace, const Tensor& dy,
                  std::vector<LayerGrad>& grads) const;
};

struct NadamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct OptimizerState {
  NadamOptions options;
  std::uint64_t t = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
};

OptimizerState make_optimizer(const ParamStore& params, const NadamOptions& options);

/// One Nadam update of every trainable parameter. Throws ValidationError
/// naming the parameter when a gradient is not finite or shapes disagree.
void nadam_step(OptimizerState& state, ParamStore& params, const Gradients& grads);

}  // namespace bcr::grad
