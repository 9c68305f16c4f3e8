#include "bcr/layers.hpp"

#include <cmath>

#include "bcr/error.hpp"

namespace bcr::layers {
namespace {

std::size_t product(const std::vector<int>& extents) {
  std::size_t n = 1;
  for (int e : extents) n *= static_cast<std::size_t>(e);
  return n;
}

std::size_t window_taps(int window, int dim) {
  std::size_t t = 1;
  for (int i = 0; i < dim; ++i) t *= static_cast<std::size_t>(window);
  return t;
}

inline int wrap(int i, int n) {
  const int r = i % n;
  return r < 0 ? r + n : r;
}

Tensor forward_generic(const Tensor& x, const LayerSpec& spec) {
  check_input(spec, x);
  Tensor y(output_extents(spec, x.extents()), spec.out_channels);
  const std::vector<int> table = gather_table(spec, x.extents());
  const std::size_t T = spec.kind == LayerKind::Dense ? x.positions() : spec.taps();
  const std::size_t O = static_cast<std::size_t>(spec.out_channels);
  const std::size_t I = static_cast<std::size_t>(spec.in_channels);
  const std::size_t per_position = spec.kind == LayerKind::Conv ? 0 : T * O * I;
  const bool position_bias = spec.kind == LayerKind::LocallyConnected;
  const std::size_t P = y.positions();
  for (std::size_t i = 0; i < P; ++i) {
    const double* w = spec.weights.data() + i * per_position;
    const double* b = spec.bias.data() + (position_bias ? i * O : 0);
    double* yi = &y.at(i, 0);
    for (std::size_t o = 0; o < O; ++o) yi[o] = b[o];
    for (std::size_t t = 0; t < T; ++t) {
      const double* xj = x.data().data() + static_cast<std::size_t>(table[i * T + t]) * I;
      const double* wt = w + t * O * I;
      for (std::size_t o = 0; o < O; ++o) {
        double acc = 0.0;
        for (std::size_t c = 0; c < I; ++c) acc += wt[o * I + c] * xj[c];
        yi[o] += acc;
      }
    }
    if (spec.activation != Activation::Id) {
      for (std::size_t o = 0; o < O; ++o) yi[o] = activate(spec.activation, yi[o]);
    }
  }
  return y;
}

void require_kind(const LayerSpec& spec, LayerKind kind) {
  if (spec.kind != kind) {
    throw ValidationError("layer kind mismatch: expected " + to_string(kind) + ", got " +
                          to_string(spec.kind));
  }
}

}  // namespace

std::string to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::Conv: return "conv";
    case LayerKind::LocallyConnected: return "lc";
    case LayerKind::Dense: return "dense";
  }
  return "?";
}

std::string to_string(Activation act) {
  switch (act) {
    case Activation::Id: return "id";
    case Activation::Relu: return "relu";
    case Activation::Sigmoid: return "sigmoid";
  }
  return "?";
}

LayerKind parse_layer_kind(const std::string& s) {
  if (s == "conv") return LayerKind::Conv;
  if (s == "lc") return LayerKind::LocallyConnected;
  if (s == "dense") return LayerKind::Dense;
  throw ValidationError("unknown layer kind '" + s + "'");
}

Activation parse_activation(const std::string& s) {
  if (s == "id") return Activation::Id;
  if (s == "relu") return Activation::Relu;
  if (s == "sigmoid") return Activation::Sigmoid;
  throw ValidationError("unknown activation '" + s + "'");
}

std::size_t LayerSpec::taps() const {
  if (kind == LayerKind::Dense) return product(in_extents);
  return window_taps(window, dim);
}

std::size_t LayerSpec::out_positions() const {
  if (kind == LayerKind::Dense) return product(in_extents);
  std::size_t n = 1;
  for (int e : in_extents) n *= static_cast<std::size_t>(e / stride);
  return n;
}

std::size_t LayerSpec::weight_count() const {
  const std::size_t block = taps() * static_cast<std::size_t>(in_channels) * out_channels;
  return kind == LayerKind::Conv ? block : out_positions() * block;
}

std::size_t LayerSpec::bias_count() const {
  return kind == LayerKind::LocallyConnected ? out_positions() * out_channels
                                             : static_cast<std::size_t>(out_channels);
}

LayerSpec conv_layer(int dim, int in_channels, int out_channels, int window, int stride,
                     int offset, Activation act) {
  LayerSpec s;
  s.kind = LayerKind::Conv;
  s.dim = dim;
  s.in_channels = in_channels;
  s.out_channels = out_channels;
  s.window = window;
  s.stride = stride;
  s.offset = offset;
  s.activation = act;
  if (dim < 1 || dim > 2 || in_channels < 1 || out_channels < 1 || window < 1 || stride < 1) {
    throw ValidationError("conv_layer: invalid shape parameters");
  }
  s.weights.assign(s.weight_count(), 0.0);
  s.bias.assign(s.bias_count(), 0.0);
  return s;
}

LayerSpec lc_layer(std::vector<int> in_extents, int in_channels, int out_channels, int window,
                   int stride, int offset, Activation act) {
  LayerSpec s;
  s.kind = LayerKind::LocallyConnected;
  s.dim = static_cast<int>(in_extents.size());
  s.in_channels = in_channels;
  s.out_channels = out_channels;
  s.window = window;
  s.stride = stride;
  s.offset = offset;
  s.activation = act;
  s.in_extents = std::move(in_extents);
  if (s.dim < 1 || s.dim > 2 || in_channels < 1 || out_channels < 1 || window < 1 || stride < 1) {
    throw ValidationError("lc_layer: invalid shape parameters");
  }
  for (int e : s.in_extents) {
    if (e <= 0 || e % stride != 0) {
      throw ValidationError("lc_layer: stride " + std::to_string(stride) +
                            " does not divide extent " + std::to_string(e));
    }
  }
  s.weights.assign(s.weight_count(), 0.0);
  s.bias.assign(s.bias_count(), 0.0);
  return s;
}

LayerSpec dense_layer(std::vector<int> extents, int in_channels, int out_channels, Activation act) {
  LayerSpec s;
  s.kind = LayerKind::Dense;
  s.dim = static_cast<int>(extents.size());
  s.in_channels = in_channels;
  s.out_channels = out_channels;
  s.activation = act;
  s.in_extents = std::move(extents);
  if (s.dim < 1 || s.dim > 2 || in_channels < 1 || out_channels < 1) {
    throw ValidationError("dense_layer: invalid shape parameters");
  }
  s.weights.assign(s.weight_count(), 0.0);
  s.bias.assign(s.bias_count(), 0.0);
  return s;
}

std::vector<int> output_extents(const LayerSpec& spec, const std::vector<int>& in_extents) {
  if (spec.kind == LayerKind::Dense) return in_extents;
  std::vector<int> out(in_extents.size());
  for (std::size_t a = 0; a < in_extents.size(); ++a) {
    if (in_extents[a] % spec.stride != 0) {
      throw ValidationError("stride " + std::to_string(spec.stride) +
                            " does not divide spatial extent " + std::to_string(in_extents[a]));
    }
    out[a] = in_extents[a] / spec.stride;
  }
  return out;
}

std::vector<int> gather_table(const LayerSpec& spec, const std::vector<int>& in_extents) {
  const std::vector<int> out_ext = output_extents(spec, in_extents);
  const std::size_t P = product(out_ext);
  if (spec.kind == LayerKind::Dense) {
    const std::size_t T = product(in_extents);
    std::vector<int> table(P * T);
    for (std::size_t i = 0; i < P; ++i) {
      for (std::size_t t = 0; t < T; ++t) table[i * T + t] = static_cast<int>(t);
    }
    return table;
  }
  const int w = spec.window;
  const std::size_t T = spec.taps();
  std::vector<int> table(P * T);
  if (spec.dim == 1) {
    const int n = in_extents[0];
    for (std::size_t i = 0; i < P; ++i) {
      const int base = static_cast<int>(i) * spec.stride + spec.offset;
      for (int t = 0; t < w; ++t) table[i * T + t] = wrap(base + t, n);
    }
    return table;
  }
  const int n0 = in_extents[0];
  const int n1 = in_extents[1];
  const int m1 = out_ext[1];
  for (std::size_t i = 0; i < P; ++i) {
    const int i0 = static_cast<int>(i) / m1;
    const int i1 = static_cast<int>(i) % m1;
    for (int t0 = 0; t0 < w; ++t0) {
      const int r = wrap(i0 * spec.stride + spec.offset + t0, n0);
      for (int t1 = 0; t1 < w; ++t1) {
        const int c = wrap(i1 * spec.stride + spec.offset + t1, n1);
        table[i * T + static_cast<std::size_t>(t0) * w + t1] = r * n1 + c;
      }
    }
  }
  return table;
}

void check_input(const LayerSpec& spec, const Tensor& x) {
  if (x.dim() != spec.dim) {
    throw ValidationError("layer expects " + std::to_string(spec.dim) + "D input, got " +
                          std::to_string(x.dim()) + "D");
  }
  if (x.channels() != spec.in_channels) {
    throw ValidationError("layer expects " + std::to_string(spec.in_channels) +
                          " input channels, got " + std::to_string(x.channels()));
  }
  if (spec.kind != LayerKind::Conv && x.extents() != spec.in_extents) {
    throw ValidationError(to_string(spec.kind) + " layer: input extents differ from the layer's grid");
  }
  output_extents(spec, x.extents());
  if (spec.weights.size() != spec.weight_count() || spec.bias.size() != spec.bias_count()) {
    throw ValidationError(to_string(spec.kind) + " layer: weight or bias length mismatch");
  }
}

Tensor conv_forward(const Tensor& x, const LayerSpec& spec) {
  require_kind(spec, LayerKind::Conv);
  return forward_generic(x, spec);
}

Tensor lc_forward(const Tensor& x, const LayerSpec& spec) {
  require_kind(spec, LayerKind::LocallyConnected);
  return forward_generic(x, spec);
}

Tensor dense_forward(const Tensor& x, const LayerSpec& spec) {
  require_kind(spec, LayerKind::Dense);
  return forward_generic(x, spec);
}

Tensor layer_forward(const Tensor& x, const LayerSpec& spec) { return forward_generic(x, spec); }

double activate(Activation act, double z) {
  switch (act) {
    case Activation::Id: return z;
    case Activation::Relu: return z > 0.0 ? z : 0.0;
    case Activation::Sigmoid: return 1.0 / (1.0 + std::exp(-z));
  }
  return z;
}

Tensor activation_apply(Activation act, const Tensor& x) {
  Tensor y = x;
  for (double& v : y.data()) v = activate(act, v);
  return y;
}

Tensor interleave(const Tensor& x, int factor) {
  if (factor < 1 || x.channels() % factor != 0) {
    throw ValidationError("interleave: " + std::to_string(x.channels()) +
                          " channels are not divisible by " + std::to_string(factor));
  }
  const int C = x.channels() / factor;
  if (x.dim() == 1) {
    const int n = x.extent(0);
    Tensor out({n * factor}, C);
    for (int k = 0; k < n; ++k) {
      for (int c = 0; c < C; ++c) {
        for (int r = 0; r < factor; ++r) out.at(factor * k + r, c) = x.at(k, c * factor + r);
      }
    }
    return out;
  }
  if (factor != 4) throw ValidationError("interleave: 2D tensors use factor 4");
  const int n0 = x.extent(0);
  const int n1 = x.extent(1);
  Tensor out({2 * n0, 2 * n1}, C);
  for (int k0 = 0; k0 < n0; ++k0) {
    for (int k1 = 0; k1 < n1; ++k1) {
      const std::size_t src = static_cast<std::size_t>(k0) * n1 + k1;
      for (int c = 0; c < C; ++c) {
        for (int r0 = 0; r0 < 2; ++r0) {
          for (int r1 = 0; r1 < 2; ++r1) {
            const std::size_t dst = static_cast<std::size_t>(2 * k0 + r0) * (2 * n1) + 2 * k1 + r1;
            out.at(dst, c) = x.at(src, c * 4 + 2 * r0 + r1);
          }
        }
      }
    }
  }
  return out;
}

Tensor deinterleave(const Tensor& x, int factor) {
  if (factor < 1) throw ValidationError("deinterleave: factor must be positive");
  const int C = x.channels();
  if (x.dim() == 1) {
    if (x.extent(0) % factor != 0) {
      throw ValidationError("deinterleave: extent not divisible by " + std::to_string(factor));
    }
    const int n = x.extent(0) / factor;
    Tensor out({n}, C * factor);
    for (int k = 0; k < n; ++k) {
      for (int c = 0; c < C; ++c) {
        for (int r = 0; r < factor; ++r) out.at(k, c * factor + r) = x.at(factor * k + r, c);
      }
    }
    return out;
  }
  if (factor != 4) throw ValidationError("deinterleave: 2D tensors use factor 4");
  if (x.extent(0) % 2 != 0 || x.extent(1) % 2 != 0) {
    throw ValidationError("deinterleave: 2D extents must be even");
  }
  const int n0 = x.extent(0) / 2;
  const int n1 = x.extent(1) / 2;
  Tensor out({n0, n1}, C * 4);
  for (int k0 = 0; k0 < n0; ++k0) {
    for (int k1 = 0; k1 < n1; ++k1) {
      const std::size_t dst = static_cast<std::size_t>(k0) * n1 + k1;
      for (int c = 0; c < C; ++c) {
        for (int r0 = 0; r0 < 2; ++r0) {
          for (int r1 = 0; r1 < 2; ++r1) {
            const std::size_t src = static_cast<std::size_t>(2 * k0 + r0) * (2 * n1) + 2 * k1 + r1;
            out.at(dst, c * 4 + 2 * r0 + r1) = x.at(src, c);
          }
        }
      }
    }
  }
  return out;
}

LayerSpec wavelet_analysis_conv(const wavelet::FilterPair& f, int dim, int alpha) {
  const int w = f.length();
  const int types = 1 << dim;
  LayerSpec s = conv_layer(dim, alpha, types * alpha, w, 2, 0, Activation::Id);
  const std::size_t O = static_cast<std::size_t>(types) * alpha;
  const std::size_t I = static_cast<std::size_t>(alpha);
  // filter 0 is the high pass (psi), filter 1 the low pass (phi)
  const std::vector<double>* bank[2] = {&f.g, &f.h};
  if (dim == 1) {
    for (int t = 0; t < w; ++t) {
      for (int c = 0; c < alpha; ++c) {
        for (int a = 0; a < 2; ++a) {
          s.weights[(t * O + a * alpha + c) * I + c] = (*bank[a])[t];
        }
      }
    }
    return s;
  }
  for (int t0 = 0; t0 < w; ++t0) {
    for (int t1 = 0; t1 < w; ++t1) {
      const std::size_t t = static_cast<std::size_t>(t0) * w + t1;
      for (int c = 0; c < alpha; ++c) {
        for (int a = 0; a < 2; ++a) {
          for (int b = 0; b < 2; ++b) {
            const std::size_t o = static_cast<std::size_t>(2 * a + b) * alpha + c;
            s.weights[(t * O + o) * I + c] = (*bank[a])[t0] * (*bank[b])[t1];
          }
        }
      }
    }
  }
  return s;
}

LayerSpec wavelet_synthesis_conv(const wavelet::FilterPair& f, int dim, int alpha) {
  const int p = f.p;
  const int types = 1 << dim;
  const int channels = types * alpha;
  LayerSpec s = conv_layer(dim, channels, channels, p, 1, -(p - 1), Activation::Id);
  const std::size_t O = static_cast<std::size_t>(channels);
  const std::size_t I = static_cast<std::size_t>(channels);
  const std::vector<double>* bank[2] = {&f.g, &f.h};
  if (dim == 1) {
    for (int t = 0; t < p; ++t) {
      for (int c = 0; c < alpha; ++c) {
        for (int r = 0; r < 2; ++r) {
          const int tap = 2 * (p - 1 - t) + r;
          const std::size_t o = static_cast<std::size_t>(2 * c + r);
          for (int a = 0; a < 2; ++a) {
            s.weights[(t * O + o) * I + a * alpha + c] = (*bank[a])[tap];
          }
        }
      }
    }
    return s;
  }
  for (int t0 = 0; t0 < p; ++t0) {
    for (int t1 = 0; t1 < p; ++t1) {
      const std::size_t t = static_cast<std::size_t>(t0) * p + t1;
      for (int c = 0; c < alpha; ++c) {
        for (int r0 = 0; r0 < 2; ++r0) {
          for (int r1 = 0; r1 < 2; ++r1) {
            const std::size_t o = static_cast<std::size_t>(4 * c + 2 * r0 + r1);
            const int tap0 = 2 * (p - 1 - t0) + r0;
            const int tap1 = 2 * (p - 1 - t1) + r1;
            for (int a = 0; a < 2; ++a) {
              for (int b = 0; b < 2; ++b) {
                const std::size_t in = static_cast<std::size_t>(2 * a + b) * alpha + c;
                s.weights[(t * O + o) * I + in] = (*bank[a])[tap0] * (*bank[b])[tap1];
              }
            }
          }
        }
      }
    }
  }
  return s;
}

}  // namespace bcr::layers
