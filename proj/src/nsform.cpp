#include "bcr/nsform.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "bcr/error.hpp"

namespace bcr::nsform {
namespace {

using wavelet::FilterPair;
using wavelet::FlopCounter;

void forward_any(int dim, std::span<const double> in, std::span<double> out, const FilterPair& f,
                 FlopCounter* flops) {
  if (dim == 1) {
    const std::size_t m = in.size() / 2;
    wavelet::forward_step_into(in, out.subspan(0, m), out.subspan(m, m), f, flops);
  } else {
    const int n = static_cast<int>(std::lround(std::sqrt(static_cast<double>(in.size()))));
    wavelet::forward_step_2d_into(in, n, out, f, flops);
  }
}

void inverse_any(int dim, std::span<const double> in, std::span<double> out, const FilterPair& f,
                 FlopCounter* flops) {
  if (dim == 1) {
    const std::size_t m = in.size() / 2;
    wavelet::inverse_step_into(in.subspan(0, m), in.subspan(m, m), out, f, flops);
  } else {
    const int m = static_cast<int>(std::lround(std::sqrt(static_cast<double>(in.size() / 4))));
    wavelet::inverse_step_2d_into(in, m, out, f, flops);
  }
}

// Applies the per-vector transform to every column of x.
template <typename Step>
Eigen::MatrixXd transform_columns(const Eigen::MatrixXd& x, Step step) {
  Eigen::MatrixXd y(x.rows(), x.cols());
  const auto rows = static_cast<std::size_t>(x.rows());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    step(std::span<const double>(x.col(j).data(), rows), std::span<double>(y.col(j).data(), rows));
  }
  return y;
}

bool canonical_offset(int offset, int m) { return 2 * offset > -m && 2 * offset <= m; }

inline int wrap(int i, int m) {
  const int r = i % m;
  return r < 0 ? r + m : r;
}

// Column read by each (position, window slot) of a level's band, and whether
// the slot is the canonical home of that column. Non-canonical slots alias a
// column already covered by another slot and always hold zero.
struct BandLayout {
  std::vector<int> cols;
  std::vector<char> canonical;
};

BandLayout band_layout(int dim, int level, int n_b) {
  const int m = 1 << level;
  const int b = (n_b - 1) / 2;
  BandLayout layout;
  if (dim == 1) {
    const std::size_t size = static_cast<std::size_t>(m) * n_b;
    layout.cols.resize(size);
    layout.canonical.resize(size);
    for (int k = 0; k < m; ++k) {
      for (int t = 0; t < n_b; ++t) {
        const int o = t - b;
        const std::size_t slot = static_cast<std::size_t>(k) * n_b + t;
        layout.cols[slot] = wrap(k + o, m);
        layout.canonical[slot] = canonical_offset(o, m);
      }
    }
    return layout;
  }
  const std::size_t window = static_cast<std::size_t>(n_b) * n_b;
  const std::size_t size = static_cast<std::size_t>(m) * m * window;
  layout.cols.resize(size);
  layout.canonical.resize(size);
  for (int i1 = 0; i1 < m; ++i1) {
    for (int i2 = 0; i2 < m; ++i2) {
      const std::size_t pos = static_cast<std::size_t>(i1) * m + i2;
      for (int t1 = 0; t1 < n_b; ++t1) {
        for (int t2 = 0; t2 < n_b; ++t2) {
          const int o1 = t1 - b;
          const int o2 = t2 - b;
          const std::size_t slot = pos * window + static_cast<std::size_t>(t1) * n_b + t2;
          layout.cols[slot] = wrap(i1 + o1, m) * m + wrap(i2 + o2, m);
          layout.canonical[slot] = canonical_offset(o1, m) && canonical_offset(o2, m);
        }
      }
    }
  }
  return layout;
}

void check_form(const NonstandardForm& ns) {
  if (ns.dim != 1 && ns.dim != 2) throw ValidationError("nonstandard form: dim must be 1 or 2");
  if (static_cast<int>(ns.levels.size()) != ns.L - ns.L0) {
    throw ValidationError("nonstandard form: level count does not match L - L0");
  }
}

std::uint64_t transform_cost(int dim, int p, std::uint64_t m) {
  // One analysis (or synthesis) step from side 2m to side m.
  return dim == 1 ? 4ull * p * m : 16ull * p * m * m;
}

template <bool Count>
std::vector<double> apply_impl(const NonstandardForm& ns, std::span<const double> v,
                               FlopCounter* flops) {
  check_form(ns);
  if (v.size() != ns.size()) {
    throw ValidationError("apply: vector length " + std::to_string(v.size()) +
                          " does not match operator size " + std::to_string(ns.size()));
  }
  const FilterPair& f = wavelet::make_filters(ns.p);
  FlopCounter* counter = Count ? flops : nullptr;
  const int C = ns.channels();
  const int nlev = ns.L - ns.L0;

  std::vector<std::vector<double>> xi(nlev);
  std::vector<double> current(v.begin(), v.end());
  for (int level = ns.L - 1; level >= ns.L0; --level) {
    const std::size_t M = ns.positions(level);
    auto& x = xi[level - ns.L0];
    x.resize(C * M);
    forward_any(ns.dim, current, x, f, counter);
    current.assign(x.end() - static_cast<std::ptrdiff_t>(M), x.end());
  }

  const auto M0 = static_cast<Eigen::Index>(ns.positions(ns.L0));
  std::vector<double> u(M0, 0.0);
  for (Eigen::Index r = 0; r < M0; ++r) {
    double acc = 0.0;
    for (Eigen::Index c = 0; c < M0; ++c) acc += ns.top(r, c) * current[c];
    u[r] = acc;
  }
  if constexpr (Count) *flops += static_cast<FlopCounter>(M0) * M0;

  const std::size_t W = ns.window();
  for (int level = ns.L0; level < ns.L; ++level) {
    const std::size_t M = ns.positions(level);
    const NsLevel& lv = ns.at(level);
    const std::vector<int> cols = band_layout(ns.dim, level, ns.n_b).cols;
    const auto& x = xi[level - ns.L0];
    std::vector<double> chi(C * M, 0.0);
    for (int r = 0; r < C; ++r) {
      for (int c = 0; c < C; ++c) {
        if (r == C - 1 && c == C - 1) continue;
        const std::vector<double>& band = lv.blocks[r * C + c];
        const double* xc = x.data() + c * M;
        double* out = chi.data() + r * M;
        for (std::size_t k = 0; k < M; ++k) {
          double acc = 0.0;
          for (std::size_t t = 0; t < W; ++t) acc += band[k * W + t] * xc[cols[k * W + t]];
          out[k] += acc;
        }
        if constexpr (Count) *flops += static_cast<FlopCounter>(M) * W;
      }
    }
    double* scaling = chi.data() + (C - 1) * M;
    for (std::size_t k = 0; k < M; ++k) scaling[k] += u[k];
    if constexpr (Count) *flops += M;
    std::vector<double> next(C * M);
    inverse_any(ns.dim, chi, next, f, counter);
    u = std::move(next);
  }
  return u;
}

}  // namespace

KernelSpec explicit_matrix(Eigen::MatrixXd a, int dim) {
  KernelSpec spec;
  spec.kind = KernelSpec::Kind::ExplicitMatrix;
  spec.dim = dim;
  spec.matrix = std::move(a);
  spec.name = "explicit";
  return spec;
}

KernelSpec constant_kernel(double value, int dim) {
  KernelSpec spec;
  spec.dim = dim;
  spec.kernel = [value](std::span<const double>, std::span<const double>) { return value; };
  spec.name = "constant";
  return spec;
}

KernelSpec inverse_distance_kernel(int dim, std::optional<double> eps) {
  KernelSpec spec;
  spec.dim = dim;
  spec.singular_diagonal = true;
  spec.regularization = eps;
  const double e = eps.value_or(0.0);
  spec.kernel = [e](std::span<const double> x, std::span<const double> y) {
    return 1.0 / (periodic_distance(x, y) + e);
  };
  spec.name = "invdist";
  return spec;
}

double periodic_distance(std::span<const double> x, std::span<const double> y) {
  double sq = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double d = std::abs(x[i] - y[i]);
    d -= std::floor(d);
    d = std::min(d, 1.0 - d);
    sq += d * d;
  }
  return std::sqrt(sq);
}

Eigen::MatrixXd project_kernel(const KernelSpec& spec, int L) {
  if (spec.dim != 1 && spec.dim != 2) throw ValidationError("project_kernel: dim must be 1 or 2");
  const int max_level = spec.dim == 1 ? 12 : 6;
  if (L < 1 || L > max_level) {
    throw ValidationError("project_kernel: level L = " + std::to_string(L) + " outside 1.." +
                          std::to_string(max_level));
  }
  const Eigen::Index side = Eigen::Index{1} << (L * spec.dim);
  if (spec.kind == KernelSpec::Kind::ExplicitMatrix) {
    if (spec.matrix.rows() != side || spec.matrix.cols() != side) {
      throw ValidationError("project_kernel: explicit matrix must be " + std::to_string(side) +
                            " x " + std::to_string(side));
    }
    return spec.matrix;
  }
  if (!spec.kernel) throw ValidationError("project_kernel: kernel function missing");
  if (spec.singular_diagonal && !spec.regularization) {
    throw ValidationError("project_kernel: kernel '" + spec.name +
                          "' is singular on the diagonal and has no regularization parameter");
  }
  const int n = 1 << L;
  const double h = 1.0 / n;
  const double scale = std::pow(h, spec.dim);
  Eigen::MatrixXd a(side, side);
  std::vector<double> x(spec.dim), y(spec.dim);
  auto coords = [&](Eigen::Index k, std::vector<double>& out) {
    if (spec.dim == 1) {
      out[0] = static_cast<double>(k) * h;
    } else {
      out[0] = static_cast<double>(k / n) * h;
      out[1] = static_cast<double>(k % n) * h;
    }
  };
  for (Eigen::Index k1 = 0; k1 < side; ++k1) {
    coords(k1, x);
    for (Eigen::Index k2 = 0; k2 < side; ++k2) {
      coords(k2, y);
      a(k1, k2) = scale * spec.kernel(x, y);
    }
  }
  return a;
}

std::size_t NonstandardForm::window() const {
  std::size_t w = 1;
  for (int i = 0; i < dim; ++i) w *= static_cast<std::size_t>(n_b);
  return w;
}

int full_band(int L) {
  // The finest stored level is L-1 with m = 2^(L-1); offsets up to m/2.
  return L >= 2 ? (1 << (L - 1)) + 1 : 1;
}

NonstandardForm decompose_operator(const Eigen::MatrixXd& a, int p, int L0, int n_b, int dim) {
  if (dim != 1 && dim != 2) throw ValidationError("decompose_operator: dim must be 1 or 2");
  if (a.rows() != a.cols()) throw ValidationError("decompose_operator: matrix must be square");
  const int side_log = wavelet::exact_log2(static_cast<std::size_t>(a.rows()));
  if (side_log < 0 || side_log % dim != 0) {
    throw ValidationError("decompose_operator: side " + std::to_string(a.rows()) +
                          " is not a power of two" + (dim == 2 ? " squared" : ""));
  }
  if (n_b < 1 || n_b % 2 == 0) {
    throw ValidationError("decompose_operator: band width n_b = " + std::to_string(n_b) +
                          " must be odd (the band is centered)");
  }
  const FilterPair& f = wavelet::make_filters(p);
  const int L = side_log / dim;
  if (L0 < wavelet::min_coarse_level(p)) {
    throw ValidationError("decompose_operator: L0 = " + std::to_string(L0) +
                          " is below ceil(log2(2p)) = " +
                          std::to_string(wavelet::min_coarse_level(p)));
  }
  if (L <= L0) throw ValidationError("decompose_operator: need L > L0");

  NonstandardForm ns;
  ns.dim = dim;
  ns.L = L;
  ns.L0 = L0;
  ns.p = p;
  ns.n_b = n_b;
  ns.levels.resize(L - L0);

  const int C = ns.channels();
  const std::size_t W = ns.window();
  auto step = [&](std::span<const double> in, std::span<double> out) {
    forward_any(dim, in, out, f, nullptr);
  };

  Eigen::MatrixXd current = a;
  for (int level = L - 1; level >= L0; --level) {
    const Eigen::MatrixXd left = transform_columns(current, step);
    const Eigen::MatrixXd t = transform_columns(left.transpose(), step).transpose();
    const auto M = static_cast<Eigen::Index>(ns.positions(level));
    const BandLayout layout = band_layout(dim, level, n_b);

    NsLevel& lv = ns.levels[level - L0];
    lv.level = level;
    lv.blocks.assign(ns.block_count(), std::vector<double>(M * W, 0.0));
    lv.kept_energy.assign(ns.block_count(), 0.0);
    lv.dropped_energy.assign(ns.block_count(), 0.0);
    for (int r = 0; r < C; ++r) {
      for (int c = 0; c < C; ++c) {
        if (r == C - 1 && c == C - 1) continue;
        const int j = r * C + c;
        const auto block = t.block(r * M, c * M, M, M);
        double kept = 0.0;
        for (Eigen::Index k = 0; k < M; ++k) {
          for (std::size_t s = 0; s < W; ++s) {
            if (!layout.canonical[k * W + s]) continue;
            const double value = block(k, layout.cols[k * W + s]);
            lv.blocks[j][k * W + s] = value;
            kept += value * value;
          }
        }
        lv.kept_energy[j] = kept;
        lv.dropped_energy[j] = std::max(0.0, block.squaredNorm() - kept);
      }
    }
    current = t.block((C - 1) * M, (C - 1) * M, M, M);
  }
  ns.top = current;
  return ns;
}

std::vector<double> apply(const NonstandardForm& ns, std::span<const double> v) {
  return apply_impl<false>(ns, v, nullptr);
}

InstrumentedResult apply_instrumented(const NonstandardForm& ns, std::span<const double> v) {
  InstrumentedResult result;
  result.u = apply_impl<true>(ns, v, &result.flops);
  return result;
}

std::uint64_t flop_count(const NonstandardForm& ns) {
  check_form(ns);
  const std::uint64_t blocks = static_cast<std::uint64_t>(ns.block_count());
  std::uint64_t total = 0;
  for (int level = ns.L0; level < ns.L; ++level) {
    const std::uint64_t m = std::uint64_t{1} << level;
    const std::uint64_t M = ns.positions(level);
    total += 2 * transform_cost(ns.dim, ns.p, m);  // analysis + synthesis
    total += blocks * M * ns.window() + M;          // banded products + coarse injection
  }
  const std::uint64_t M0 = ns.positions(ns.L0);
  return total + M0 * M0;
}

Eigen::MatrixXd reconstruct_operator(const NonstandardForm& ns) {
  check_form(ns);
  const FilterPair& f = wavelet::make_filters(ns.p);
  const int C = ns.channels();
  const std::size_t W = ns.window();
  auto step = [&](std::span<const double> in, std::span<double> out) {
    inverse_any(ns.dim, in, out, f, nullptr);
  };
  Eigen::MatrixXd current = ns.top;
  for (int level = ns.L0; level < ns.L; ++level) {
    const auto M = static_cast<Eigen::Index>(ns.positions(level));
    const BandLayout layout = band_layout(ns.dim, level, ns.n_b);
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(C * M, C * M);
    const NsLevel& lv = ns.at(level);
    for (int r = 0; r < C; ++r) {
      for (int c = 0; c < C; ++c) {
        if (r == C - 1 && c == C - 1) continue;
        const auto& band = lv.blocks[r * C + c];
        for (Eigen::Index k = 0; k < M; ++k) {
          for (std::size_t s = 0; s < W; ++s) {
            if (layout.canonical[k * W + s]) t(r * M + k, c * M + layout.cols[k * W + s]) = band[k * W + s];
          }
        }
      }
    }
    t.block((C - 1) * M, (C - 1) * M, M, M) = current;
    const Eigen::MatrixXd left = transform_columns(t, step);
    current = transform_columns(left.transpose(), step).transpose();
  }
  return current;
}

std::vector<double> max_abs_by_offset(const NonstandardForm& ns, int level, int block) {
  if (ns.dim != 1) throw ValidationError("max_abs_by_offset: 1D forms only");
  const NsLevel& lv = ns.at(level);
  if (block < 0 || block >= ns.block_count()) throw ValidationError("max_abs_by_offset: bad block");
  const int m = 1 << level;
  const int b = ns.half_width();
  std::vector<double> out(m / 2 + 1, 0.0);
  const auto& band = lv.blocks[block];
  for (int k = 0; k < m; ++k) {
    for (int t = 0; t < ns.n_b; ++t) {
      const int o = t - b;
      if (!canonical_offset(o, m)) continue;
      const std::size_t slot = static_cast<std::size_t>(k) * ns.n_b + t;
      out[std::abs(o)] = std::max(out[std::abs(o)], std::abs(band[slot]));
    }
  }
  return out;
}

std::size_t count_above(const NonstandardForm& ns, double tol) {
  std::size_t count = 0;
  for (const auto& lv : ns.levels) {
    for (const auto& band : lv.blocks) {
      count += static_cast<std::size_t>(
          std::count_if(band.begin(), band.end(), [tol](double x) { return std::abs(x) > tol; }));
    }
  }
  return count;
}

}  // namespace bcr::nsform
