#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bcr/grad.hpp"
#include "bcr/layers.hpp"
#include "bcr/nsform.hpp"
#include "bcr/tensor.hpp"

namespace bcr::bcrnet {

enum class NetMode { Lc, Conv };
enum class TransformInit { Wavelet, Random };

std::string to_string(NetMode mode);
std::string to_string(TransformInit init);
NetMode parse_mode(const std::string& s);
TransformInit parse_transform_init(const std::string& s);

struct NetConfig {
  int dim = 1;
  int p = 3;
  int L = 6;
  int L0 = 3;
  int n_b = 3;
  int alpha = 2;
  int K = 5;
  NetMode mode = NetMode::Lc;
  layers::Activation activation = layers::Activation::Relu;
  TransformInit transform_init = TransformInit::Wavelet;
  bool transform_trainable = true;

  /// Throws ValidationError naming the first violated invariant. The coarse
  /// level bound L0 >= ceil(log2(2p)) applies only to wavelet-initialized
  /// transforms; random transforms need L > L0 >= 1.
  void validate() const;
  int channels() const { return (1 << dim) * alpha; }
  std::vector<int> extents(int level) const;
};

struct NetLayer {
  std::string name;
  layers::LayerSpec spec;
  bool trainable = true;
};

/// Intermediate tensors of one evaluation, indexed by level - L0.
struct Trace {
  Tensor input;                            // input broadcast to alpha channels
  std::vector<Tensor> down_in;             // v^(l+1) fed to the analysis conv
  std::vector<Tensor> xi;                  // analysis conv output at level l
  std::vector<Tensor> tower;               // u^(L0)_0 .. u^(L0)_K
  std::vector<std::vector<Tensor>> zeta;   // zeta_0 .. zeta_K per level
  std::vector<Tensor> summed;              // zeta_K with u^(l) added
  std::vector<Tensor> up_out;              // synthesis conv output before interleave
  Tensor u_top;                            // u^(L)
};

/// Layers in evaluation order: analysis convs for l = L-1..L0, the coarse
/// tower of K layers, then for each l = L0..L-1 the K scale layers followed
/// by the synthesis conv. Every layer owns two parameters, weights and bias.
class Network {
 public:
  NetConfig config;
  std::vector<NetLayer> layers;

  std::size_t levels() const { return static_cast<std::size_t>(config.L - config.L0); }
  NetLayer& down(int level) { return layers[index_down(level)]; }
  NetLayer& tower(int k) { return layers[index_tower(k)]; }
  NetLayer& scale(int level, int k) { return layers[index_scale(level, k)]; }
  NetLayer& up(int level) { return layers[index_up(level)]; }
  const NetLayer& down(int level) const { return layers[index_down(level)]; }
  const NetLayer& tower(int k) const { return layers[index_tower(k)]; }
  const NetLayer& scale(int level, int k) const { return layers[index_scale(level, k)]; }
  const NetLayer& up(int level) const { return layers[index_up(level)]; }

  std::vector<int> input_extents() const { return config.extents(config.L); }

  /// Single-channel field in, single-channel field out.
  Tensor evaluate(const Tensor& x) const;
  Tensor forward(const Tensor& x, Trace& trace) const;
  /// Adds parameter gradients into grads (aligned with params()) and
  /// returns dL/dx.
  Tensor backward(const Trace& trace, const Tensor& dy, grad::Gradients& grads) const;

  grad::ParamStore params() const;
  void set_params(const grad::ParamStore& params);

  std::size_t weight_tally() const;
  std::size_t bias_tally() const;

 private:
  std::size_t index_down(int level) const;
  std::size_t index_tower(int k) const;
  std::size_t index_scale(int level, int k) const;
  std::size_t index_up(int level) const;
};

/// Structure for cfg with all weights zero.
Network build_structure(const NetConfig& cfg);

/// Random network: N(0, 1/fan_in) weights with fan_in = taps * in_channels,
/// zero biases; transform convs follow cfg.transform_init.
Network build_bcrnet(const NetConfig& cfg, std::uint64_t seed);

/// Overwrites the weights of an alpha = 1, K = 1 network with the
/// nonstandard form: wavelet convs, banded scale layers and the dense top.
void load_nonstandard_form(Network& net, const nsform::NonstandardForm& ns);

/// The exact linear translation of the nonstandard-form matvec.
Network build_linear_net(const nsform::NonstandardForm& ns);

struct ParamCount {
  std::uint64_t weights = 0;
  std::uint64_t biases = 0;
};

/// Closed-form parameter count for cfg.
ParamCount param_count(const NetConfig& cfg);

}  // namespace bcr::bcrnet
