#include "bcr/apps.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <random>
#include <thread>

#include "bcr/error.hpp"

namespace bcr::apps {
namespace {

// Interpolation weights w[i][j]: value at fine point i from coarse sample j.
std::vector<double> interpolation_matrix(int m, int n) {
  std::vector<double> w(static_cast<std::size_t>(n) * m);
  for (int i = 0; i < n; ++i) {
    const double x = static_cast<double>(i) / n;
    for (int j = 0; j < m; ++j) {
      const double dx = x - static_cast<double>(j) / m;
      double acc = 1.0;
      for (int k = 1; 2 * k < m; ++k) acc += 2.0 * std::cos(2.0 * std::numbers::pi * k * dx);
      if (m % 2 == 0 && m > 1) acc += std::cos(std::numbers::pi * m * dx);
      w[static_cast<std::size_t>(i) * m + j] = acc / m;
    }
  }
  return w;
}

std::size_t side_of(std::size_t size, int dim) {
  if (dim == 1) return size;
  const auto s = static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(size))));
  if (s * s != size) throw ValidationError("2D field length is not a perfect square");
  return s;
}

TaskSample make_sample(const DatasetDescriptor& d, std::uint64_t index, std::uint64_t stream) {
  TaskSample s;
  s.input = sample_field(d.dim, d.n, d.coarse, d.seed, index, stream);
  try {
    s.target = d.task == Task::Smoke ? smoke_target(s.input, d.dim) : green_diag_oracle(s.input, d.dim);
  } catch (const ValidationError& e) {
    throw ValidationError("sample " + std::to_string(index) + " of stream " + std::to_string(stream) +
                          ": " + e.what());
  }
  return s;
}

std::vector<TaskSample> make_split(const DatasetDescriptor& d, int count, std::uint64_t stream,
                                   int threads) {
  std::vector<TaskSample> out(static_cast<std::size_t>(count));
  const int workers = std::max(1, std::min(threads, count));
  if (workers == 1) {
    for (int i = 0; i < count; ++i) out[static_cast<std::size_t>(i)] = make_sample(d, i, stream);
    return out;
  }
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (int i = w; i < count; i += workers) {
          out[static_cast<std::size_t>(i)] = make_sample(d, static_cast<std::uint64_t>(i), stream);
        }
      } catch (...) {
        errors[static_cast<std::size_t>(w)] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

}  // namespace

std::string to_string(Task task) {
  switch (task) {
    case Task::Green1d: return "green1d";
    case Task::Green2d: return "green2d";
    case Task::Smoke: return "smoke";
  }
  return "?";
}

Task parse_task(const std::string& s) {
  if (s == "green1d") return Task::Green1d;
  if (s == "green2d") return Task::Green2d;
  if (s == "smoke") return Task::Smoke;
  throw ValidationError("unknown task '" + s + "' (expected green1d, green2d or smoke)");
}

std::vector<double> fourier_interpolate(std::span<const double> coarse, int m, int n, int dim) {
  if (dim != 1 && dim != 2) throw ValidationError("fourier_interpolate: dim must be 1 or 2");
  if (m < 1 || n < 1) throw ValidationError("fourier_interpolate: grid sizes must be positive");
  if (m > n) {
    throw ValidationError("coarse grid " + std::to_string(m) + " is finer than the target grid " +
                          std::to_string(n));
  }
  const std::size_t expect = dim == 1 ? static_cast<std::size_t>(m) : static_cast<std::size_t>(m) * m;
  if (coarse.size() != expect) throw ValidationError("fourier_interpolate: coarse length mismatch");
  const std::vector<double> w = interpolation_matrix(m, n);
  if (dim == 1) {
    std::vector<double> out(static_cast<std::size_t>(n), 0.0);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < m; ++j) out[i] += w[static_cast<std::size_t>(i) * m + j] * coarse[j];
    }
    return out;
  }
  // rows first: m x n, then columns: n x n
  std::vector<double> rows(static_cast<std::size_t>(m) * n, 0.0);
  for (int r = 0; r < m; ++r) {
    for (int i = 0; i < n; ++i) {
      double acc = 0.0;
      for (int j = 0; j < m; ++j) acc += w[static_cast<std::size_t>(i) * m + j] * coarse[static_cast<std::size_t>(r) * m + j];
      rows[static_cast<std::size_t>(r) * n + i] = acc;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i) {
    for (int c = 0; c < n; ++c) {
      double acc = 0.0;
      for (int r = 0; r < m; ++r) acc += w[static_cast<std::size_t>(i) * m + r] * rows[static_cast<std::size_t>(r) * n + c];
      out[static_cast<std::size_t>(i) * n + c] = acc;
    }
  }
  return out;
}

std::vector<double> field_from_coarse(std::span<const double> coarse, int m, int n, int dim) {
  std::vector<double> f = fourier_interpolate(coarse, m, n, dim);
  for (double& x : f) x = std::exp(x);
  return f;
}

std::vector<double> coarse_normals(int m, int dim, std::uint64_t seed, std::uint64_t index,
                                   std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                    static_cast<std::uint32_t>(stream)};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> normal(0.0, 1.0);
  const std::size_t count = dim == 1 ? static_cast<std::size_t>(m) : static_cast<std::size_t>(m) * m;
  std::vector<double> z(count);
  for (double& x : z) x = normal(rng);
  return z;
}

std::vector<double> sample_field(int dim, int n, int m, std::uint64_t seed, std::uint64_t index,
                                 std::uint64_t stream) {
  if (m > n) {
    throw ValidationError("coarse grid " + std::to_string(m) + " is finer than the target grid " +
                          std::to_string(n));
  }
  return field_from_coarse(coarse_normals(m, dim, seed, index, stream), m, n, dim);
}

std::vector<double> green_diag_oracle(std::span<const double> v, int dim) {
  if (dim != 1 && dim != 2) throw ValidationError("green_diag_oracle: dim must be 1 or 2");
  const std::size_t N = side_of(v.size(), dim);
  if (N < 3) throw ValidationError("green_diag_oracle: grid too small");
  if ((dim == 1 && N > 1024) || (dim == 2 && N > 32)) {
    throw ValidationError("green_diag_oracle: grid too large for the dense oracle");
  }
  for (double x : v) {
    if (!(x > 0.0) || !std::isfinite(x)) throw ValidationError("green_diag_oracle: potential must be positive");
  }
  const auto n = static_cast<Eigen::Index>(v.size());
  const double inv_h2 = static_cast<double>(N) * static_cast<double>(N);
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(n, n);
  const auto S = static_cast<Eigen::Index>(N);
  if (dim == 1) {
    for (Eigen::Index i = 0; i < S; ++i) {
      H(i, i) += 2.0 * inv_h2 + v[static_cast<std::size_t>(i)];
      H(i, (i + 1) % S) -= inv_h2;
      H(i, (i + S - 1) % S) -= inv_h2;
    }
  } else {
    for (Eigen::Index r = 0; r < S; ++r) {
      for (Eigen::Index c = 0; c < S; ++c) {
        const Eigen::Index i = r * S + c;
        H(i, i) += 4.0 * inv_h2 + v[static_cast<std::size_t>(i)];
        H(i, ((r + 1) % S) * S + c) -= inv_h2;
        H(i, ((r + S - 1) % S) * S + c) -= inv_h2;
        H(i, r * S + (c + 1) % S) -= inv_h2;
        H(i, r * S + (c + S - 1) % S) -= inv_h2;
      }
    }
  }
  Eigen::LLT<Eigen::MatrixXd> llt(H);
  if (llt.info() != Eigen::Success) throw ValidationError("green_diag_oracle: operator is singular");
  // diag(H^-1)_i = |L^-1 e_i|^2
  Eigen::MatrixXd linv = Eigen::MatrixXd::Identity(n, n);
  llt.matrixL().solveInPlace(linv);
  std::vector<double> g(v.size());
  for (Eigen::Index i = 0; i < n; ++i) g[static_cast<std::size_t>(i)] = linv.col(i).squaredNorm();
  for (double x : g) {
    if (!std::isfinite(x)) throw ValidationError("green_diag_oracle: operator is singular");
  }
  return g;
}

std::vector<double> smoke_target(std::span<const double> v, int dim) {
  static constexpr double kKernel[3] = {0.125, 0.25, 0.125};
  const std::size_t N = side_of(v.size(), dim);
  std::vector<double> out(v.size());
  if (dim == 1) {
    for (std::size_t i = 0; i < N; ++i) {
      double acc = 0.0;
      for (std::size_t t = 0; t < 3; ++t) acc += kKernel[t] * v[(i + N + t - 1) % N];
      out[i] = std::tanh(acc);
    }
    return out;
  }
  for (std::size_t r = 0; r < N; ++r) {
    for (std::size_t c = 0; c < N; ++c) {
      double acc = 0.0;
      for (std::size_t a = 0; a < 3; ++a) {
        for (std::size_t b = 0; b < 3; ++b) {
          acc += 4.0 * kKernel[a] * kKernel[b] * v[((r + N + a - 1) % N) * N + (c + N + b - 1) % N];
        }
      }
      out[r * N + c] = std::tanh(acc);
    }
  }
  return out;
}

Dataset make_dataset(const DatasetDescriptor& d, int threads) {
  if (d.dim != 1 && d.dim != 2) throw ValidationError("dataset: dim must be 1 or 2");
  if ((d.task == Task::Green1d && d.dim != 1) || (d.task == Task::Green2d && d.dim != 2)) {
    throw ValidationError("dataset: task " + to_string(d.task) + " does not match dim " +
                          std::to_string(d.dim));
  }
  if (d.n_train < 0 || d.n_test < 0 || d.n_train + d.n_test == 0) {
    throw ValidationError("dataset: need at least one sample");
  }
  if (d.n < 2 || (d.n & (d.n - 1)) != 0) throw ValidationError("dataset: grid side must be a power of two");
  if (d.coarse < 1 || d.coarse > d.n) {
    throw ValidationError("coarse grid " + std::to_string(d.coarse) + " must lie in 1.." +
                          std::to_string(d.n));
  }
  Dataset out;
  out.descriptor = d;
  out.train = make_split(d, d.n_train, 0, threads);
  out.test = make_split(d, d.n_test, 1, threads);
  return out;
}

}  // namespace bcr::apps
