#include "bcr/grad.hpp"

#include <cmath>

#include "bcr/error.hpp"

namespace bcr::grad {

using layers::Activation;
using layers::LayerKind;
using layers::LayerSpec;

void ParamStore::add(std::string name, std::vector<double> value, bool trainable) {
  if (find(name) != nullptr) throw ValidationError("duplicate parameter name '" + name + "'");
  params_.push_back(Param{std::move(name), std::move(value), trainable});
}

const Param* ParamStore::find(const std::string& name) const {
  for (const Param& p : params_) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const Param& p : params_) n += p.value.size();
  return n;
}

Gradients zero_gradients(const ParamStore& params) {
  Gradients g;
  g.reserve(params.size());
  for (const Param& p : params) g.emplace_back(p.value.size(), 0.0);
  return g;
}

LayerGrad LayerGrad::zeros_like(const LayerSpec& spec) {
  return LayerGrad{std::vector<double>(spec.weights.size(), 0.0),
                   std::vector<double>(spec.bias.size(), 0.0)};
}

Tensor activation_backward(Activation act, const Tensor& y, const Tensor& dy) {
  if (!y.same_shape(dy)) throw ValidationError("activation_backward: shape mismatch");
  Tensor dz = dy;
  switch (act) {
    case Activation::Id:
      break;
    case Activation::Relu:
      for (std::size_t i = 0; i < dz.size(); ++i) {
        if (!(y[i] > 0.0)) dz[i] = 0.0;
      }
      break;
    case Activation::Sigmoid:
      for (std::size_t i = 0; i < dz.size(); ++i) dz[i] *= y[i] * (1.0 - y[i]);
      break;
  }
  return dz;
}

Tensor layer_backward(const Tensor& x, const Tensor& y, const Tensor& dy, const LayerSpec& spec,
                      LayerGrad* acc) {
  layers::check_input(spec, x);
  if (!y.same_shape(dy) || y.extents() != layers::output_extents(spec, x.extents()) ||
      y.channels() != spec.out_channels) {
    throw ValidationError("layer_backward: recorded output and upstream gradient disagree");
  }
  if (acc != nullptr &&
      (acc->weights.size() != spec.weights.size() || acc->bias.size() != spec.bias.size())) {
    throw ValidationError("layer_backward: gradient accumulator has the wrong shape");
  }
  const Tensor dz = activation_backward(spec.activation, y, dy);
  const std::vector<int> table = layers::gather_table(spec, x.extents());
  const std::size_t T = spec.kind == LayerKind::Dense ? x.positions() : spec.taps();
  const std::size_t O = static_cast<std::size_t>(spec.out_channels);
  const std::size_t I = static_cast<std::size_t>(spec.in_channels);
  const std::size_t per_position = spec.kind == LayerKind::Conv ? 0 : T * O * I;
  const bool position_bias = spec.kind == LayerKind::LocallyConnected;
  const std::size_t P = y.positions();

  Tensor dx(x.extents(), x.channels());
  const double* xd = x.data().data();
  double* dxd = dx.data().data();
  const double* dzd = dz.data().data();
  for (std::size_t i = 0; i < P; ++i) {
    const double* w = spec.weights.data() + i * per_position;
    const double* dzi = dzd + i * O;
    if (acc != nullptr) {
      double* db = acc->bias.data() + (position_bias ? i * O : 0);
      for (std::size_t o = 0; o < O; ++o) db[o] += dzi[o];
    }
    double* dw = acc != nullptr ? acc->weights.data() + i * per_position : nullptr;
    for (std::size_t t = 0; t < T; ++t) {
      const std::size_t j = static_cast<std::size_t>(table[i * T + t]);
      const double* xj = xd + j * I;
      double* dxj = dxd + j * I;
      const double* wt = w + t * O * I;
      for (std::size_t o = 0; o < O; ++o) {
        const double g = dzi[o];
        if (g == 0.0) continue;
        const double* wo = wt + o * I;
        for (std::size_t c = 0; c < I; ++c) dxj[c] += wo[c] * g;
        if (dw != nullptr) {
          double* dwo = dw + t * O * I + o * I;
          for (std::size_t c = 0; c < I; ++c) dwo[c] += g * xj[c];
        }
      }
    }
  }
  return dx;
}

Tensor interleave_backward(const Tensor& dy, int factor) { return layers::deinterleave(dy, factor); }

Loss mse_loss(const Tensor& pred, const Tensor& target) {
  if (!pred.same_shape(target)) throw ValidationError("mse_loss: prediction and target shapes differ");
  Loss loss;
  loss.grad = Tensor(pred.extents(), pred.channels());
  const double n = static_cast<double>(pred.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double r = pred[i] - target[i];
    acc += r * r;
    loss.grad[i] = 2.0 * r / n;
  }
  loss.value = acc / n;
  return loss;
}

void Sequential::push(LayerSpec spec, int interleave_factor) {
  layers.push_back(std::move(spec));
  interleave_after.push_back(interleave_factor);
}

Tensor Sequential::forward(const Tensor& x, std::vector<Tensor>* trace) const {
  if (trace != nullptr) {
    trace->clear();
    trace->push_back(x);
  }
  Tensor cur = x;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    cur = layers::layer_forward(cur, layers[l]);
    if (trace != nullptr) trace->push_back(cur);
    if (interleave_after[l] > 0) cur = layers::interleave(cur, interleave_after[l]);
  }
  return cur;
}

Tensor Sequential::backward(const std::vector<Tensor>& trace, const Tensor& dy,
                            std::vector<LayerGrad>& grads) const {
  if (trace.size() != layers.size() + 1 || grads.size() != layers.size()) {
    throw ValidationError("Sequential::backward: trace or gradient list has the wrong length");
  }
  Tensor g = dy;
  for (std::size_t l = layers.size(); l-- > 0;) {
    if (interleave_after[l] > 0) g = interleave_backward(g, interleave_after[l]);
    Tensor in = trace[l];
    if (l > 0 && interleave_after[l - 1] > 0) in = layers::interleave(in, interleave_after[l - 1]);
    g = layer_backward(in, trace[l + 1], g, layers[l], &grads[l]);
  }
  return g;
}

OptimizerState make_optimizer(const ParamStore& params, const NadamOptions& options) {
  OptimizerState s;
  s.options = options;
  for (const Param& p : params) {
    s.m.emplace_back(p.value.size(), 0.0);
    s.v.emplace_back(p.value.size(), 0.0);
  }
  return s;
}

void nadam_step(OptimizerState& state, ParamStore& params, const Gradients& grads) {
  if (grads.size() != params.size() || state.m.size() != params.size()) {
    throw ValidationError("nadam_step: gradient list does not match the parameters");
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (grads[k].size() != params[k].value.size() || state.m[k].size() != params[k].value.size()) {
      throw ValidationError("nadam_step: shape mismatch for parameter '" + params[k].name + "'");
    }
    for (double g : grads[k]) {
      if (!std::isfinite(g)) {
        throw ValidationError("nadam_step: non-finite gradient for parameter '" + params[k].name + "'");
      }
    }
  }
  const NadamOptions& o = state.options;
  state.t += 1;
  const double t = static_cast<double>(state.t);
  const double b1t = std::pow(o.beta1, t);
  const double b1t_next = std::pow(o.beta1, t + 1.0);
  const double b2t = std::pow(o.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (!params[k].trainable) continue;
    std::vector<double>& theta = params[k].value;
    std::vector<double>& m = state.m[k];
    std::vector<double>& v = state.v[k];
    const std::vector<double>& g = grads[k];
    for (std::size_t i = 0; i < theta.size(); ++i) {
      m[i] = o.beta1 * m[i] + (1.0 - o.beta1) * g[i];
      v[i] = o.beta2 * v[i] + (1.0 - o.beta2) * g[i] * g[i];
      const double m_hat = o.beta1 * m[i] / (1.0 - b1t_next) + (1.0 - o.beta1) * g[i] / (1.0 - b1t);
      const double v_hat = v[i] / (1.0 - b2t);
      theta[i] -= o.lr * m_hat / (std::sqrt(v_hat) + o.eps);
    }
  }
}

}  // namespace bcr::grad
