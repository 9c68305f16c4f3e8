#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace bcr::wavelet {

inline constexpr int kMinOrder = 1;
inline constexpr int kMaxOrder = 6;

/// Orthonormal Daubechies filter pair with p vanishing moments.
///
/// h is indexed 0..2p-1. g follows g_i = (-1)^(1-i) h_(1-i) and is nonzero
/// for i = -2p+2..1; it is stored from its first index, so g[j] holds
/// g_(j + g_offset) with g_offset = -2p+2.
struct FilterPair {
  int p = 0;
  std::vector<double> h;
  std::vector<double> g;
  int g_offset = 0;

  int length() const { return 2 * p; }
  /// h_i, zero outside the support.
  double h_at(int i) const;
  /// g_i, zero outside the support.
  double g_at(int i) const;
};

/// Residuals of the defining relations; all should be near zero.
struct FilterResiduals {
  double unit_norm = 0.0;          // |sum h_i^2 - 1|
  double shift_orthogonality = 0.0;  // max_m!=0 |sum h_i h_(i+2m)|
  double dc_gain = 0.0;            // |sum h_i - sqrt(2)|
  double quadrature_mirror = 0.0;  // max_i |g_i - (-1)^(1-i) h_(1-i)|
  double vanishing_moments = 0.0;  // max_j<p |sum g_i i^j|
};

FilterResiduals check_filters(const FilterPair& f);

/// Minimal-phase Daubechies filters for 1 <= p <= 6. Throws ValidationError
/// for other orders.
const FilterPair& make_filters(int p);

/// Smallest coarse level whose grid holds the whole filter: ceil(log2(2p)).
int min_coarse_level(int p);

/// Multiply-add counter threaded through the transform kernels.
using FlopCounter = std::uint64_t;

// Index convention of the analysis step on a periodic sequence x of even
// length n, with m = n/2:
//
//   v[k] = sum_{j=0}^{2p-1} h_j                  x[(2k + j) mod n]
//   d[k] = sum_{j=0}^{2p-1} g_(j + g_offset)     x[(2k + j) mod n]
//
// The stored offset of g is absorbed into the tap position so that d[k] and
// v[k] read the same window x[2k .. 2k+2p-1]. Relative to the two-sided sum
// sum_i g_i x[2k + i] this relabels d by a cyclic shift: d[k] equals the
// two-sided value at index (k + p - 1) mod m. Both conventions are orthogonal.

/// Analysis step into caller-provided buffers (d and v of length n/2).
void forward_step_into(std::span<const double> fine, std::span<double> d, std::span<double> v,
                       const FilterPair& f, FlopCounter* flops = nullptr);

/// Synthesis step, the transpose (and inverse) of forward_step_into.
void inverse_step_into(std::span<const double> d, std::span<const double> v,
                       std::span<double> fine, const FilterPair& f,
                       FlopCounter* flops = nullptr);

struct StepResult {
  std::vector<double> d;
  std::vector<double> v;
};

StepResult forward_step(std::span<const double> fine, const FilterPair& f);
std::vector<double> inverse_step(std::span<const double> d, std::span<const double> v,
                                 const FilterPair& f);

// Separable 2D step on an n x n row-major grid. Output is channel-major:
// four m x m row-major grids in the order (psi psi, psi phi, phi psi, phi phi),
// where the first factor acts along axis 0 (rows index) and the second along
// axis 1. Channel 3 carries the scaling coefficients.
void forward_step_2d_into(std::span<const double> fine, int n, std::span<double> out,
                          const FilterPair& f, FlopCounter* flops = nullptr);
void inverse_step_2d_into(std::span<const double> in, int m, std::span<double> fine,
                          const FilterPair& f, FlopCounter* flops = nullptr);

/// Scaling and wavelet coefficients from level L down to L0.
struct CoeffPyramid {
  int L = 0;
  int L0 = 0;
  std::vector<std::vector<double>> v_levels;  // index l - L0, l = L0..L
  std::vector<std::vector<double>> d_levels;  // index l - L0, l = L0..L-1

  const std::vector<double>& v(int level) const { return v_levels.at(level - L0); }
  const std::vector<double>& d(int level) const { return d_levels.at(level - L0); }
};

/// Applies forward_step L-L0 times. Requires length 2^L with L > L0 >= min_coarse_level(p).
CoeffPyramid decompose(std::span<const double> v, const FilterPair& f, int L0);
std::vector<double> reconstruct(const CoeffPyramid& pyramid, const FilterPair& f);

/// log2 of n when n is a positive power of two, otherwise -1.
int exact_log2(std::size_t n);

}  // namespace bcr::wavelet
