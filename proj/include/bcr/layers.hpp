#pragma once

#include <string>
#include <vector>

#include "bcr/tensor.hpp"
#include "bcr/wavelet.hpp"

namespace bcr::layers {

enum class LayerKind { Conv, LocallyConnected, Dense };
enum class Activation { Id, Relu, Sigmoid };

std::string to_string(LayerKind kind);
std::string to_string(Activation act);
LayerKind parse_layer_kind(const std::string& s);
Activation parse_activation(const std::string& s);

/// One layer with periodic padding.
///
/// Output position i (per axis) reads input taps i*stride + offset + t for
/// t = 0..window-1, wrapped modulo the input extent. A dense layer instead
/// reads every input position. Weight layouts, with T the taps per output
/// position (window^dim, or the input position count for dense):
///   conv  [T][out][in]            shared by all output positions
///   lc    [P_out][T][out][in]
///   dense [P_out][P_in][out][in]
/// Biases are [out] for conv and dense and [P_out][out] for lc.
struct LayerSpec {
  LayerKind kind = LayerKind::Conv;
  int dim = 1;
  int in_channels = 1;
  int out_channels = 1;
  int window = 1;
  int stride = 1;
  int offset = 0;
  Activation activation = Activation::Id;
  std::vector<int> in_extents;  // fixed for lc and dense, empty for conv
  std::vector<double> weights;
  std::vector<double> bias;

  std::size_t taps() const;
  std::size_t out_positions() const;  // lc and dense only
  std::size_t weight_count() const;
  std::size_t bias_count() const;
};

LayerSpec conv_layer(int dim, int in_channels, int out_channels, int window, int stride,
                     int offset, Activation act);
LayerSpec lc_layer(std::vector<int> in_extents, int in_channels, int out_channels, int window,
                   int stride, int offset, Activation act);
LayerSpec dense_layer(std::vector<int> extents, int in_channels, int out_channels, Activation act);

/// Spatial extents produced by `spec` from an input of `in_extents`.
std::vector<int> output_extents(const LayerSpec& spec, const std::vector<int>& in_extents);

/// Input position read by each (output position, tap), row-major [P_out][T].
std::vector<int> gather_table(const LayerSpec& spec, const std::vector<int>& in_extents);

/// Throws ValidationError unless x can be fed to spec.
void check_input(const LayerSpec& spec, const Tensor& x);

Tensor conv_forward(const Tensor& x, const LayerSpec& spec);
Tensor lc_forward(const Tensor& x, const LayerSpec& spec);
Tensor dense_forward(const Tensor& x, const LayerSpec& spec);
/// Dispatches on spec.kind.
Tensor layer_forward(const Tensor& x, const LayerSpec& spec);

double activate(Activation act, double z);
Tensor activation_apply(Activation act, const Tensor& x);

/// Channel-to-space reshape. 1D: out[factor*k + r, c] = in[k, c*factor + r].
/// 2D (factor 4): in channel c*4 + 2*r1 + r2 at (k1, k2) moves to
/// (2*k1 + r1, 2*k2 + r2), channel c.
Tensor interleave(const Tensor& x, int factor);
/// Inverse of interleave.
Tensor deinterleave(const Tensor& x, int factor);

/// Stride-2 conv of window 2p computing one analysis step per feature:
/// alpha input channels -> 2^dim * alpha outputs, channel type*alpha + c with
/// type ordered (psi, phi) in 1D and (psi psi, psi phi, phi psi, phi phi) in 2D.
LayerSpec wavelet_analysis_conv(const wavelet::FilterPair& f, int dim, int alpha);

/// Stride-1 conv of window p (offset -(p-1)) whose output, passed through
/// interleave(., 2^dim), performs one synthesis step per feature. Input
/// channels follow wavelet_analysis_conv; output channel c*2^dim + phase
/// holds the polyphase component `phase` of feature c. In 1D
///   out[k, 2c + r] = sum_{t<p} h_(2(p-1-t)+r) v_c[k-p+1+t] + g~_(2(p-1-t)+r) d_c[k-p+1+t]
/// with g~_j = g_(j + g_offset) the window-aligned high-pass taps.
LayerSpec wavelet_synthesis_conv(const wavelet::FilterPair& f, int dim, int alpha);

}  // namespace bcr::layers
