#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bcr/wavelet.hpp"

namespace bcr::nsform {

/// Integral operator on the periodic unit interval (dim 1) or square (dim 2),
/// given either as an explicit matrix or as a kernel function a(x, y).
struct KernelSpec {
  enum class Kind { ExplicitMatrix, KernelFunction };

  Kind kind = Kind::KernelFunction;
  int dim = 1;
  Eigen::MatrixXd matrix;  // ExplicitMatrix only
  /// Kernel a(x, y); x and y each hold `dim` coordinates in [0, 1).
  std::function<double(std::span<const double>, std::span<const double>)> kernel;
  /// The kernel blows up on x == y and needs `regularization` to be usable.
  bool singular_diagonal = false;
  std::optional<double> regularization;
  std::string name;
};

KernelSpec explicit_matrix(Eigen::MatrixXd a, int dim = 1);
KernelSpec constant_kernel(double value, int dim = 1);
/// a(x, y) = 1 / (d(x, y) + eps) with d the periodic distance. Without eps
/// the kernel is singular and project_kernel refuses it.
KernelSpec inverse_distance_kernel(int dim, std::optional<double> eps);

/// Periodic distance on [0,1)^dim.
double periodic_distance(std::span<const double> x, std::span<const double> y);

/// Scaled point collocation A_(k1,k2) = 2^(-L dim) a(x_k1, x_k2). Explicit
/// matrices are returned as-is after a shape check.
Eigen::MatrixXd project_kernel(const KernelSpec& spec, int L);

/// Banded detail blocks of one level. Each block stores, for every position
/// k1 of the 2^(l dim) grid, a centered window of (2b+1)^dim periodic offsets.
/// A slot holds the entry at column k1 + offset only when that offset is the
/// canonical representative in (-m/2, m/2] per axis (m = 2^l); duplicate
/// wrap-around slots hold zero so each matrix entry is stored at most once.
struct NsLevel {
  int level = 0;
  /// blocks[j] is D_(j+1): block row r, column c with j = r*C + c, C = 2^dim,
  /// excluding (C-1, C-1) which is the coarse operator itself.
  std::vector<std::vector<double>> blocks;
  /// Squared Frobenius norm kept inside / dropped outside the band per block.
  std::vector<double> kept_energy;
  std::vector<double> dropped_energy;
};

/// Nonstandard form of an operator.
///
/// Channel order on every level is (psi, phi) in 1D and
/// (psi psi, psi phi, phi psi, phi phi) in 2D, identically for rows and
/// columns, so the 2D blocks D_1..D_15 fill a 4 x 4 layout row by row with
/// the coarse operator at (4, 4).
struct NonstandardForm {
  int dim = 1;
  int L = 0;
  int L0 = 0;
  int p = 0;
  int n_b = 0;
  std::vector<NsLevel> levels;  // index l - L0
  Eigen::MatrixXd top;          // A^(L0)

  int half_width() const { return (n_b - 1) / 2; }
  int channels() const { return 1 << dim; }
  int block_count() const { return channels() * channels() - 1; }
  std::size_t positions(int level) const { return std::size_t{1} << (level * dim); }
  std::size_t window() const;  // n_b^dim
  std::size_t size() const { return std::size_t{1} << (L * dim); }
  const NsLevel& at(int level) const { return levels.at(level - L0); }
};

/// Smallest odd band width that keeps every entry at every level below L.
int full_band(int L);

/// Builds the nonstandard form by the level recursion from L down to L0;
/// each level is computed exactly from the dense A^(l+1) before its detail
/// blocks are cut to the band.
NonstandardForm decompose_operator(const Eigen::MatrixXd& a, int p, int L0, int n_b, int dim = 1);

/// u = A v evaluated through the nonstandard form in O(N).
std::vector<double> apply(const NonstandardForm& ns, std::span<const double> v);

struct InstrumentedResult {
  std::vector<double> u;
  std::uint64_t flops = 0;
};

/// apply() that also counts every multiply-add it performs.
InstrumentedResult apply_instrumented(const NonstandardForm& ns, std::span<const double> v);

/// Closed-form multiply-add count of apply().
std::uint64_t flop_count(const NonstandardForm& ns);

/// Dense operator represented by the (possibly truncated) form.
Eigen::MatrixXd reconstruct_operator(const NonstandardForm& ns);

/// Largest |entry| of block `block` at level `level` for each periodic
/// offset 0..m/2 (1D only; offsets beyond the band report 0).
std::vector<double> max_abs_by_offset(const NonstandardForm& ns, int level, int block);

/// Diagnostic: number of stored band entries with |x| > tol.
std::size_t count_above(const NonstandardForm& ns, double tol);

}  // namespace bcr::nsform
