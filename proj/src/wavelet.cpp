#include "bcr/wavelet.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

#include "bcr/error.hpp"

namespace bcr::wavelet {
namespace {

// Minimal-phase Daubechies low-pass coefficients, h_0 first, normalized to
// sum sqrt(2). Generated by spectral factorization at 60 digits.
const std::array<std::vector<double>, kMaxOrder> kLowPass = {{
    // p = 1
    {0.707106781186547524401, 0.707106781186547524401},
    // p = 2
    {0.482962913144534143375, 0.836516303737807905575, 0.224143868042013381026,
     -0.129409522551260381174},
    // p = 3
    {0.332670552950082615999, 0.806891509311092576494, 0.459877502118491570095,
     -0.135011020010254588696, -0.0854412738820266616928, 0.0352262918857095366027},
    // p = 4
    {0.230377813308896500863, 0.71484657055291564709, 0.630880767929858907882,
     -0.0279837694168598542114, -0.18703481171909308408, 0.0308413818355607636272,
     0.0328830116668851997354, -0.0105974017850690321049},
    // p = 5
    {0.160102397974192914481, 0.60382926979718967054, 0.724308528437772927728,
     0.138428145901320731505, -0.242294887066382031863, -0.0322448695846383746485,
     0.0775714938400457135231, -0.00624149021279827427419, -0.0125807519990819994685,
     0.003335725285473771278},
    // p = 6
    {0.111540743350109463621, 0.494623890398453085677, 0.751133908021095350679,
     0.315250351709197629086, -0.226264693965439820076, -0.129766867567261935562,
     0.0975016055873230491023, 0.0275228655303057286255, -0.0315820393174860295651,
     0.000553842201161496139252, 0.00477725751094551063964, -0.00107730108530847956485},
}};

FilterPair build_pair(int p) {
  FilterPair f;
  f.p = p;
  f.h = kLowPass[p - 1];
  f.g_offset = -2 * p + 2;
  f.g.resize(f.h.size());
  for (int j = 0; j < 2 * p; ++j) {
    const int i = j + f.g_offset;
    const double sign = ((1 - i) % 2 == 0) ? 1.0 : -1.0;
    f.g[j] = sign * f.h[1 - i];
  }
  return f;
}

std::array<FilterPair, kMaxOrder> load_table() {
  std::array<FilterPair, kMaxOrder> table;
  for (int p = kMinOrder; p <= kMaxOrder; ++p) {
    table[p - 1] = build_pair(p);
    const FilterResiduals r = check_filters(table[p - 1]);
    if (r.unit_norm > 1e-12 || r.shift_orthogonality > 1e-12 || r.dc_gain > 1e-12 ||
        r.quadrature_mirror != 0.0 || r.vanishing_moments > 1e-10) {
      throw std::logic_error("Daubechies filter table failed validation for p = " +
                             std::to_string(p));
    }
  }
  return table;
}

inline std::size_t wrap(long i, std::size_t n) {
  const long r = i % static_cast<long>(n);
  return static_cast<std::size_t>(r < 0 ? r + static_cast<long>(n) : r);
}

}  // namespace

double FilterPair::h_at(int i) const {
  return (i >= 0 && i < length()) ? h[i] : 0.0;
}

double FilterPair::g_at(int i) const {
  const int j = i - g_offset;
  return (j >= 0 && j < length()) ? g[j] : 0.0;
}

FilterResiduals check_filters(const FilterPair& f) {
  FilterResiduals r;
  const int len = f.length();
  double sum_sq = 0.0;
  double sum = 0.0;
  for (double x : f.h) {
    sum_sq += x * x;
    sum += x;
  }
  r.unit_norm = std::abs(sum_sq - 1.0);
  r.dc_gain = std::abs(sum - std::sqrt(2.0));
  for (int m = 1; 2 * m < len; ++m) {
    double acc = 0.0;
    for (int i = 0; i + 2 * m < len; ++i) acc += f.h[i] * f.h[i + 2 * m];
    r.shift_orthogonality = std::max(r.shift_orthogonality, std::abs(acc));
  }
  for (int i = f.g_offset; i <= 1; ++i) {
    const double sign = ((1 - i) % 2 == 0) ? 1.0 : -1.0;
    r.quadrature_mirror = std::max(r.quadrature_mirror, std::abs(f.g_at(i) - sign * f.h_at(1 - i)));
  }
  for (int j = 0; j < f.p; ++j) {
    double acc = 0.0;
    for (int i = f.g_offset; i <= 1; ++i) acc += f.g_at(i) * std::pow(static_cast<double>(i), j);
    r.vanishing_moments = std::max(r.vanishing_moments, std::abs(acc));
  }
  return r;
}

const FilterPair& make_filters(int p) {
  if (p < kMinOrder || p > kMaxOrder) {
    throw ValidationError("unsupported wavelet order p = " + std::to_string(p) +
                          "; supported range is " + std::to_string(kMinOrder) + ".." +
                          std::to_string(kMaxOrder));
  }
  static const std::array<FilterPair, kMaxOrder> table = load_table();
  return table[p - 1];
}

int min_coarse_level(int p) {
  int level = 0;
  while ((1 << level) < 2 * p) ++level;
  return level;
}

int exact_log2(std::size_t n) {
  if (n == 0 || (n & (n - 1)) != 0) return -1;
  int level = 0;
  while ((std::size_t{1} << level) < n) ++level;
  return level;
}

void forward_step_into(std::span<const double> fine, std::span<double> d, std::span<double> v,
                       const FilterPair& f, FlopCounter* flops) {
  const std::size_t n = fine.size();
  if (n < 2 || n % 2 != 0) {
    throw ValidationError("forward_step needs an even length >= 2, got " + std::to_string(n));
  }
  const std::size_t m = n / 2;
  if (d.size() != m || v.size() != m) throw ValidationError("forward_step: output size mismatch");
  const int len = f.length();
  for (std::size_t k = 0; k < m; ++k) {
    double acc_v = 0.0;
    double acc_d = 0.0;
    if (2 * k + static_cast<std::size_t>(len) <= n) {
      const double* x = fine.data() + 2 * k;
      for (int j = 0; j < len; ++j) {
        acc_v += f.h[j] * x[j];
        acc_d += f.g[j] * x[j];
      }
    } else {
      for (int j = 0; j < len; ++j) {
        const double x = fine[wrap(static_cast<long>(2 * k) + j, n)];
        acc_v += f.h[j] * x;
        acc_d += f.g[j] * x;
      }
    }
    v[k] = acc_v;
    d[k] = acc_d;
  }
  if (flops) *flops += static_cast<FlopCounter>(2 * len) * m;
}

void inverse_step_into(std::span<const double> d, std::span<const double> v,
                       std::span<double> fine, const FilterPair& f, FlopCounter* flops) {
  const std::size_t m = v.size();
  if (d.size() != m) {
    throw ValidationError("inverse_step: detail and scaling lengths differ (" +
                          std::to_string(d.size()) + " vs " + std::to_string(m) + ")");
  }
  if (m == 0) throw ValidationError("inverse_step: empty input");
  const std::size_t n = 2 * m;
  if (fine.size() != n) throw ValidationError("inverse_step: output size mismatch");
  std::fill(fine.begin(), fine.end(), 0.0);
  const int len = f.length();
  for (std::size_t k = 0; k < m; ++k) {
    const double vk = v[k];
    const double dk = d[k];
    if (2 * k + static_cast<std::size_t>(len) <= n) {
      double* x = fine.data() + 2 * k;
      for (int j = 0; j < len; ++j) x[j] += f.h[j] * vk + f.g[j] * dk;
    } else {
      for (int j = 0; j < len; ++j) {
        fine[wrap(static_cast<long>(2 * k) + j, n)] += f.h[j] * vk + f.g[j] * dk;
      }
    }
  }
  if (flops) *flops += static_cast<FlopCounter>(2 * len) * m;
}

StepResult forward_step(std::span<const double> fine, const FilterPair& f) {
  if (fine.size() % 2 != 0 || fine.size() < 2) {
    throw ValidationError("forward_step needs an even length >= 2, got " +
                          std::to_string(fine.size()));
  }
  StepResult out;
  out.d.resize(fine.size() / 2);
  out.v.resize(fine.size() / 2);
  forward_step_into(fine, out.d, out.v, f);
  return out;
}

std::vector<double> inverse_step(std::span<const double> d, std::span<const double> v,
                                 const FilterPair& f) {
  if (d.size() != v.size()) {
    throw ValidationError("inverse_step: detail and scaling lengths differ (" +
                          std::to_string(d.size()) + " vs " + std::to_string(v.size()) + ")");
  }
  std::vector<double> fine(2 * v.size());
  inverse_step_into(d, v, fine, f);
  return fine;
}

void forward_step_2d_into(std::span<const double> fine, int n, std::span<double> out,
                          const FilterPair& f, FlopCounter* flops) {
  if (n < 2 || n % 2 != 0) throw ValidationError("forward_step_2d needs an even side >= 2");
  const std::size_t un = static_cast<std::size_t>(n);
  const std::size_t m = un / 2;
  if (fine.size() != un * un || out.size() != 4 * m * m) {
    throw ValidationError("forward_step_2d: size mismatch");
  }
  // Pass 1 along axis 0: columns of length n -> (d, v) halves of m rows each.
  std::vector<double> half_d(m * un), half_v(m * un);
  std::vector<double> col(un), cd(m), cv(m);
  for (std::size_t c = 0; c < un; ++c) {
    for (std::size_t r = 0; r < un; ++r) col[r] = fine[r * un + c];
    forward_step_into(col, cd, cv, f, flops);
    for (std::size_t r = 0; r < m; ++r) {
      half_d[r * un + c] = cd[r];
      half_v[r * un + c] = cv[r];
    }
  }
  // Pass 2 along axis 1: each row of length n.
  const std::size_t block = m * m;
  for (int a = 0; a < 2; ++a) {
    const std::vector<double>& src = (a == 0) ? half_d : half_v;
    double* out_d = out.data() + (2 * a + 0) * block;
    double* out_v = out.data() + (2 * a + 1) * block;
    for (std::size_t r = 0; r < m; ++r) {
      forward_step_into(std::span<const double>(src.data() + r * un, un),
                        std::span<double>(out_d + r * m, m), std::span<double>(out_v + r * m, m),
                        f, flops);
    }
  }
}

void inverse_step_2d_into(std::span<const double> in, int m, std::span<double> fine,
                          const FilterPair& f, FlopCounter* flops) {
  if (m < 1) throw ValidationError("inverse_step_2d needs a positive side");
  const std::size_t um = static_cast<std::size_t>(m);
  const std::size_t n = 2 * um;
  const std::size_t block = um * um;
  if (in.size() != 4 * block || fine.size() != n * n) {
    throw ValidationError("inverse_step_2d: size mismatch");
  }
  std::vector<double> half_d(um * n), half_v(um * n);
  for (int a = 0; a < 2; ++a) {
    std::vector<double>& dst = (a == 0) ? half_d : half_v;
    const double* in_d = in.data() + (2 * a + 0) * block;
    const double* in_v = in.data() + (2 * a + 1) * block;
    for (std::size_t r = 0; r < um; ++r) {
      inverse_step_into(std::span<const double>(in_d + r * um, um),
                        std::span<const double>(in_v + r * um, um),
                        std::span<double>(dst.data() + r * n, n), f, flops);
    }
  }
  std::vector<double> cd(um), cv(um), col(n);
  for (std::size_t c = 0; c < n; ++c) {
    for (std::size_t r = 0; r < um; ++r) {
      cd[r] = half_d[r * n + c];
      cv[r] = half_v[r * n + c];
    }
    inverse_step_into(cd, cv, col, f, flops);
    for (std::size_t r = 0; r < n; ++r) fine[r * n + c] = col[r];
  }
}

CoeffPyramid decompose(std::span<const double> v, const FilterPair& f, int L0) {
  const int L = exact_log2(v.size());
  if (L < 0) throw ValidationError("decompose: length must be a power of two");
  if (L0 < min_coarse_level(f.p)) {
    throw ValidationError("decompose: coarse level L0 = " + std::to_string(L0) +
                          " is below ceil(log2(2p)) = " + std::to_string(min_coarse_level(f.p)));
  }
  if (L <= L0) throw ValidationError("decompose: need L > L0");
  CoeffPyramid pyr;
  pyr.L = L;
  pyr.L0 = L0;
  pyr.v_levels.resize(L - L0 + 1);
  pyr.d_levels.resize(L - L0);
  pyr.v_levels.back().assign(v.begin(), v.end());
  for (int level = L - 1; level >= L0; --level) {
    const std::size_t m = std::size_t{1} << level;
    auto& d = pyr.d_levels[level - L0];
    auto& coarse = pyr.v_levels[level - L0];
    d.resize(m);
    coarse.resize(m);
    forward_step_into(pyr.v_levels[level - L0 + 1], d, coarse, f);
  }
  return pyr;
}

std::vector<double> reconstruct(const CoeffPyramid& pyramid, const FilterPair& f) {
  if (pyramid.v_levels.empty()) throw ValidationError("reconstruct: empty pyramid");
  std::vector<double> current = pyramid.v_levels.front();
  for (int level = pyramid.L0; level < pyramid.L; ++level) {
    std::vector<double> fine(2 * current.size());
    inverse_step_into(pyramid.d(level), current, fine, f);
    current = std::move(fine);
  }
  return current;
}

}  // namespace bcr::wavelet
