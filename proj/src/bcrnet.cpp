#include "bcr/bcrnet.hpp"

#include <cmath>
#include <random>

#include "bcr/error.hpp"
#include "bcr/wavelet.hpp"

namespace bcr::bcrnet {

using layers::Activation;
using layers::LayerKind;
using layers::LayerSpec;

namespace {

Tensor broadcast_channels(const Tensor& x, int alpha) {
  Tensor out(x.extents(), alpha);
  for (std::size_t i = 0; i < x.positions(); ++i) {
    for (int c = 0; c < alpha; ++c) out.at(i, c) = x.at(i, 0);
  }
  return out;
}

// Adds src into channels [first, first + src.channels()) of dst.
void add_into_channels(Tensor& dst, const Tensor& src, int first) {
  for (std::size_t i = 0; i < dst.positions(); ++i) {
    for (int c = 0; c < src.channels(); ++c) dst.at(i, first + c) += src.at(i, c);
  }
}

void fill_normal(std::vector<double>& w, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, stddev);
  for (double& x : w) x = normal(rng);
}

std::size_t fan_in(const LayerSpec& s) {
  return s.taps() * static_cast<std::size_t>(s.in_channels);
}

std::uint64_t pow_int(std::uint64_t base, int e) {
  std::uint64_t r = 1;
  for (int i = 0; i < e; ++i) r *= base;
  return r;
}

}  // namespace

std::string to_string(NetMode mode) { return mode == NetMode::Lc ? "lc" : "conv"; }
std::string to_string(TransformInit init) { return init == TransformInit::Wavelet ? "wavelet" : "random"; }

NetMode parse_mode(const std::string& s) {
  if (s == "lc") return NetMode::Lc;
  if (s == "conv") return NetMode::Conv;
  throw ValidationError("unknown network mode '" + s + "' (expected lc or conv)");
}

TransformInit parse_transform_init(const std::string& s) {
  if (s == "wavelet") return TransformInit::Wavelet;
  if (s == "random") return TransformInit::Random;
  throw ValidationError("unknown transform init '" + s + "' (expected wavelet or random)");
}

void NetConfig::validate() const {
  if (dim != 1 && dim != 2) throw ValidationError("config: dim must be 1 or 2");
  if (p < wavelet::kMinOrder || p > wavelet::kMaxOrder) {
    throw ValidationError("config: p must lie in 1..6");
  }
  if (alpha < 1) throw ValidationError("config: alpha must be at least 1");
  if (K < 1) throw ValidationError("config: K must be at least 1");
  if (n_b < 1 || n_b % 2 == 0) throw ValidationError("config: n_b must be odd and positive");
  if (L0 < 1) throw ValidationError("config: L0 must be at least 1");
  if (L <= L0) throw ValidationError("config: need L > L0");
  if (transform_init == TransformInit::Wavelet && L0 < wavelet::min_coarse_level(p)) {
    throw ValidationError("config: wavelet transforms need L0 >= ceil(log2(2p)) = " +
                          std::to_string(wavelet::min_coarse_level(p)));
  }
  if (L * dim > 24) throw ValidationError("config: grid too large");
}

std::vector<int> NetConfig::extents(int level) const {
  return std::vector<int>(static_cast<std::size_t>(dim), 1 << level);
}

std::size_t Network::index_down(int level) const {
  if (level < config.L0 || level >= config.L) throw ValidationError("network: level out of range");
  return static_cast<std::size_t>(config.L - 1 - level);
}

std::size_t Network::index_tower(int k) const {
  if (k < 1 || k > config.K) throw ValidationError("network: tower index out of range");
  return levels() + static_cast<std::size_t>(k - 1);
}

std::size_t Network::index_scale(int level, int k) const {
  if (level < config.L0 || level >= config.L || k < 1 || k > config.K) {
    throw ValidationError("network: scale layer index out of range");
  }
  return levels() + config.K + static_cast<std::size_t>(level - config.L0) * (config.K + 1) +
         static_cast<std::size_t>(k - 1);
}

std::size_t Network::index_up(int level) const {
  if (level < config.L0 || level >= config.L) throw ValidationError("network: level out of range");
  return levels() + config.K + static_cast<std::size_t>(level - config.L0) * (config.K + 1) +
         config.K;
}

Tensor Network::evaluate(const Tensor& x) const {
  Trace trace;
  return forward(x, trace);
}

Tensor Network::forward(const Tensor& x, Trace& trace) const {
  const NetConfig& c = config;
  if (x.channels() != 1 || x.extents() != input_extents()) {
    throw ValidationError("network: input must be a single-channel field on the level-L grid");
  }
  const std::size_t nlev = levels();
  const int C = c.channels();
  const int last = C - c.alpha;
  trace.input = broadcast_channels(x, c.alpha);
  trace.down_in.assign(nlev, Tensor());
  trace.xi.assign(nlev, Tensor());
  trace.zeta.assign(nlev, std::vector<Tensor>());
  trace.summed.assign(nlev, Tensor());
  trace.up_out.assign(nlev, Tensor());
  trace.tower.clear();

  Tensor v = trace.input;
  for (int level = c.L - 1; level >= c.L0; --level) {
    const std::size_t j = static_cast<std::size_t>(level - c.L0);
    trace.xi[j] = layers::layer_forward(v, down(level).spec);
    trace.down_in[j] = std::move(v);
    v = slice_channels(trace.xi[j], last, c.alpha);
  }
  trace.tower.push_back(std::move(v));
  for (int k = 1; k <= c.K; ++k) {
    trace.tower.push_back(layers::layer_forward(trace.tower.back(), tower(k).spec));
  }
  Tensor u = trace.tower.back();
  for (int level = c.L0; level < c.L; ++level) {
    const std::size_t j = static_cast<std::size_t>(level - c.L0);
    std::vector<Tensor>& z = trace.zeta[j];
    z.push_back(trace.xi[j]);
    for (int k = 1; k <= c.K; ++k) z.push_back(layers::layer_forward(z.back(), scale(level, k).spec));
    Tensor s = z.back();
    add_into_channels(s, u, last);
    trace.up_out[j] = layers::layer_forward(s, up(level).spec);
    trace.summed[j] = std::move(s);
    u = layers::interleave(trace.up_out[j], 1 << c.dim);
  }
  trace.u_top = u;
  Tensor out(u.extents(), 1);
  for (std::size_t i = 0; i < u.positions(); ++i) {
    double acc = 0.0;
    for (int ch = 0; ch < c.alpha; ++ch) acc += u.at(i, ch);
    out.at(i, 0) = acc / c.alpha;
  }
  return out;
}

Tensor Network::backward(const Trace& trace, const Tensor& dy, grad::Gradients& grads) const {
  const NetConfig& c = config;
  if (grads.size() != 2 * layers.size()) {
    throw ValidationError("network backward: gradient list does not match the parameters");
  }
  if (dy.channels() != 1 || dy.extents() != trace.u_top.extents()) {
    throw ValidationError("network backward: upstream gradient shape mismatch");
  }
  const int C = c.channels();
  const int last = C - c.alpha;
  auto run = [&](std::size_t index, const Tensor& in, const Tensor& out, const Tensor& g) {
    grad::LayerGrad acc{std::move(grads[2 * index]), std::move(grads[2 * index + 1])};
    Tensor dx = grad::layer_backward(in, out, g, layers[index].spec, &acc);
    grads[2 * index] = std::move(acc.weights);
    grads[2 * index + 1] = std::move(acc.bias);
    return dx;
  };

  Tensor du(trace.u_top.extents(), c.alpha);
  for (std::size_t i = 0; i < du.positions(); ++i) {
    for (int ch = 0; ch < c.alpha; ++ch) du.at(i, ch) = dy.at(i, 0) / c.alpha;
  }
  std::vector<Tensor> dxi(levels());
  for (int level = c.L - 1; level >= c.L0; --level) {
    const std::size_t j = static_cast<std::size_t>(level - c.L0);
    const Tensor dup = grad::interleave_backward(du, 1 << c.dim);
    Tensor dz = run(index_up(level), trace.summed[j], trace.up_out[j], dup);
    du = slice_channels(dz, last, c.alpha);
    const std::vector<Tensor>& z = trace.zeta[j];
    for (int k = c.K; k >= 1; --k) {
      dz = run(index_scale(level, k), z[static_cast<std::size_t>(k - 1)], z[static_cast<std::size_t>(k)], dz);
    }
    dxi[j] = std::move(dz);
  }
  Tensor dv = std::move(du);
  for (int k = c.K; k >= 1; --k) {
    dv = run(index_tower(k), trace.tower[static_cast<std::size_t>(k - 1)],
             trace.tower[static_cast<std::size_t>(k)], dv);
  }
  for (int level = c.L0; level < c.L; ++level) {
    const std::size_t j = static_cast<std::size_t>(level - c.L0);
    Tensor g = std::move(dxi[j]);
    add_into_channels(g, dv, last);
    dv = run(index_down(level), trace.down_in[j], trace.xi[j], g);
  }
  Tensor dx(dv.extents(), 1);
  for (std::size_t i = 0; i < dv.positions(); ++i) {
    double acc = 0.0;
    for (int ch = 0; ch < c.alpha; ++ch) acc += dv.at(i, ch);
    dx.at(i, 0) = acc;
  }
  return dx;
}

grad::ParamStore Network::params() const {
  grad::ParamStore store;
  for (const NetLayer& l : layers) {
    store.add(l.name + ".w", l.spec.weights, l.trainable);
    store.add(l.name + ".b", l.spec.bias, l.trainable);
  }
  return store;
}

void Network::set_params(const grad::ParamStore& params) {
  if (params.size() != 2 * layers.size()) {
    throw ValidationError("set_params: expected " + std::to_string(2 * layers.size()) +
                          " parameters, got " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const grad::Param& w = params[2 * i];
    const grad::Param& b = params[2 * i + 1];
    if (w.name != layers[i].name + ".w" || b.name != layers[i].name + ".b" ||
        w.value.size() != layers[i].spec.weights.size() ||
        b.value.size() != layers[i].spec.bias.size()) {
      throw ValidationError("set_params: parameter '" + w.name + "' does not fit layer '" +
                            layers[i].name + "'");
    }
  }
  for (std::size_t i = 0; i < layers.size(); ++i) {
    layers[i].spec.weights = params[2 * i].value;
    layers[i].spec.bias = params[2 * i + 1].value;
  }
}

std::size_t Network::weight_tally() const {
  std::size_t n = 0;
  for (const NetLayer& l : layers) n += l.spec.weights.size();
  return n;
}

std::size_t Network::bias_tally() const {
  std::size_t n = 0;
  for (const NetLayer& l : layers) n += l.spec.bias.size();
  return n;
}

Network build_structure(const NetConfig& cfg) {
  cfg.validate();
  Network net;
  net.config = cfg;
  const int dim = cfg.dim;
  const int a = cfg.alpha;
  const int C = cfg.channels();
  const int b = (cfg.n_b - 1) / 2;
  const Activation phi = cfg.activation;
  const bool transform_trainable = cfg.transform_trainable;
  for (int level = cfg.L - 1; level >= cfg.L0; --level) {
    net.layers.push_back({"down.l" + std::to_string(level),
                          layers::conv_layer(dim, a, C, 2 * cfg.p, 2, 0, Activation::Id),
                          transform_trainable});
  }
  for (int k = 1; k <= cfg.K; ++k) {
    LayerSpec s = cfg.mode == NetMode::Lc
                      ? layers::dense_layer(cfg.extents(cfg.L0), a, a, phi)
                      : layers::conv_layer(dim, a, a, 1 << cfg.L0, 1, 0, phi);
    net.layers.push_back({"tower.k" + std::to_string(k), std::move(s), true});
  }
  for (int level = cfg.L0; level < cfg.L; ++level) {
    const std::string tag = "l" + std::to_string(level);
    for (int k = 1; k <= cfg.K; ++k) {
      LayerSpec s = cfg.mode == NetMode::Lc
                        ? layers::lc_layer(cfg.extents(level), C, C, cfg.n_b, 1, -b, phi)
                        : layers::conv_layer(dim, C, C, cfg.n_b, 1, -b, phi);
      net.layers.push_back({"scale." + tag + ".k" + std::to_string(k), std::move(s), true});
    }
    net.layers.push_back({"up." + tag,
                          layers::conv_layer(dim, C, C, cfg.p, 1, -(cfg.p - 1), Activation::Id),
                          transform_trainable});
  }
  return net;
}

Network build_bcrnet(const NetConfig& cfg, std::uint64_t seed) {
  Network net = build_structure(cfg);
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    0x6e657477u};
  std::mt19937_64 rng(seq);
  const bool wavelet = cfg.transform_init == TransformInit::Wavelet;
  const wavelet::FilterPair& f = wavelet::make_filters(cfg.p);
  for (NetLayer& l : net.layers) {
    const bool is_transform = l.name.rfind("down.", 0) == 0 || l.name.rfind("up.", 0) == 0;
    if (is_transform && wavelet) {
      const bool is_down = l.name.rfind("down.", 0) == 0;
      l.spec.weights = is_down ? layers::wavelet_analysis_conv(f, cfg.dim, cfg.alpha).weights
                               : layers::wavelet_synthesis_conv(f, cfg.dim, cfg.alpha).weights;
      continue;
    }
    fill_normal(l.spec.weights, 1.0 / std::sqrt(static_cast<double>(fan_in(l.spec))), rng);
  }
  return net;
}

void load_nonstandard_form(Network& net, const nsform::NonstandardForm& ns) {
  const NetConfig& c = net.config;
  if (c.alpha != 1 || c.K != 1) {
    throw ValidationError("load_nonstandard_form: network needs alpha = 1 and K = 1");
  }
  if (c.dim != ns.dim || c.L != ns.L || c.L0 != ns.L0 || c.p != ns.p || c.n_b != ns.n_b ||
      c.mode != NetMode::Lc) {
    throw ValidationError("load_nonstandard_form: network and form disagree on dim, L, L0, p or n_b");
  }
  const wavelet::FilterPair& f = wavelet::make_filters(ns.p);
  const int C = ns.channels();
  const std::size_t win = ns.window();
  for (int level = c.L0; level < c.L; ++level) {
    net.down(level).spec.weights = layers::wavelet_analysis_conv(f, c.dim, 1).weights;
    net.up(level).spec.weights = layers::wavelet_synthesis_conv(f, c.dim, 1).weights;
    LayerSpec& s = net.scale(level, 1).spec;
    const nsform::NsLevel& lv = ns.at(level);
    const std::size_t P = ns.positions(level);
    std::fill(s.weights.begin(), s.weights.end(), 0.0);
    for (std::size_t i = 0; i < P; ++i) {
      for (std::size_t t = 0; t < win; ++t) {
        for (int r = 0; r < C; ++r) {
          for (int col = 0; col < C; ++col) {
            const int j = r * C + col;
            if (j == C * C - 1) continue;
            s.weights[((i * win + t) * C + r) * C + col] = lv.blocks[j][i * win + t];
          }
        }
      }
    }
    std::fill(s.bias.begin(), s.bias.end(), 0.0);
  }
  LayerSpec& d = net.tower(1).spec;
  const auto P0 = static_cast<Eigen::Index>(ns.positions(c.L0));
  for (Eigen::Index i = 0; i < P0; ++i) {
    for (Eigen::Index j = 0; j < P0; ++j) d.weights[static_cast<std::size_t>(i * P0 + j)] = ns.top(i, j);
  }
  for (NetLayer& l : net.layers) std::fill(l.spec.bias.begin(), l.spec.bias.end(), 0.0);
}

Network build_linear_net(const nsform::NonstandardForm& ns) {
  NetConfig cfg;
  cfg.dim = ns.dim;
  cfg.p = ns.p;
  cfg.L = ns.L;
  cfg.L0 = ns.L0;
  cfg.n_b = ns.n_b;
  cfg.alpha = 1;
  cfg.K = 1;
  cfg.mode = NetMode::Lc;
  cfg.activation = Activation::Id;
  cfg.transform_init = TransformInit::Wavelet;
  Network net = build_structure(cfg);
  load_nonstandard_form(net, ns);
  return net;
}

ParamCount param_count(const NetConfig& cfg) {
  const std::uint64_t a = static_cast<std::uint64_t>(cfg.alpha);
  const std::uint64_t C = (std::uint64_t{1} << cfg.dim) * a;
  const std::uint64_t K = static_cast<std::uint64_t>(cfg.K);
  const std::uint64_t p = static_cast<std::uint64_t>(cfg.p);
  const std::uint64_t nb = static_cast<std::uint64_t>(cfg.n_b);
  const std::uint64_t down = pow_int(2 * p, cfg.dim) * a * C;
  const std::uint64_t upw = pow_int(p, cfg.dim) * C * C;
  ParamCount pc;
  for (int level = cfg.L0; level < cfg.L; ++level) {
    const std::uint64_t positions = std::uint64_t{1} << (level * cfg.dim);
    pc.weights += down + upw;
    pc.biases += 2 * C;
    if (cfg.mode == NetMode::Lc) {
      pc.weights += K * positions * pow_int(nb, cfg.dim) * C * C;
      pc.biases += K * positions * C;
    } else {
      pc.weights += K * pow_int(nb, cfg.dim) * C * C;
      pc.biases += K * C;
    }
  }
  const std::uint64_t top = std::uint64_t{1} << (cfg.L0 * cfg.dim);
  pc.weights += cfg.mode == NetMode::Lc ? K * top * top * a * a : K * top * a * a;
  pc.biases += K * a;
  return pc;
}

}  // namespace bcr::bcrnet
