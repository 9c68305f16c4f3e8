#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "bcr/apps.hpp"
#include "bcr/error.hpp"
#include "support.hpp"

using namespace bcr;
using namespace bcr::apps;

namespace {

double laplacian_eigenvalue(int k, int n) {
  return (2.0 - 2.0 * std::cos(2.0 * std::numbers::pi * k / n)) * n * n;
}

double smooth_potential(double x) { return 1.0 + std::exp(std::sin(2.0 * std::numbers::pi * x)); }

std::vector<double> scaled_diag(int n) {
  std::vector<double> v(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) v[i] = smooth_potential(static_cast<double>(i) / n);
  std::vector<double> g = green_diag_oracle(v, 1);
  for (double& x : g) x *= n;  // diag(H^-1) ~ h G(x, x)
  return g;
}

}  // namespace

TEST_CASE("constant potential matches the eigen-decomposition in 1D") {
  for (int n : {16, 64, 256}) {
    for (double c : {0.5, 3.0, 100.0}) {
      const std::vector<double> g = green_diag_oracle(std::vector<double>(n, c), 1);
      double want = 0.0;
      for (int k = 0; k < n; ++k) want += 1.0 / (laplacian_eigenvalue(k, n) + c);
      want /= n;
      for (double x : g) CHECK(x == doctest::Approx(want).epsilon(1e-10));
    }
  }
}

TEST_CASE("constant potential matches the eigen-decomposition in 2D") {
  const int n = 8;
  const double c = 2.0;
  const std::vector<double> g = green_diag_oracle(std::vector<double>(n * n, c), 2);
  double want = 0.0;
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) want += 1.0 / (laplacian_eigenvalue(a, n) + laplacian_eigenvalue(b, n) + c);
  }
  want /= n * n;
  for (double x : g) CHECK(x == doctest::Approx(want).epsilon(1e-10));
}

TEST_CASE("huge potential gives g close to 1/v") {
  const std::vector<double> g = green_diag_oracle(std::vector<double>(64, 1e6), 1);
  for (double x : g) CHECK(std::abs(x * 1e6 - 1.0) <= 0.01);
}

TEST_CASE("reflection of v reflects g") {
  std::mt19937_64 rng(1);
  const std::vector<double> v = sample_field(1, 64, 8, 3);
  std::vector<double> r(64);
  for (int i = 0; i < 64; ++i) r[i] = v[(64 - i) % 64];
  const auto g = green_diag_oracle(v, 1);
  const auto gr = green_diag_oracle(r, 1);
  for (int i = 0; i < 64; ++i) CHECK(gr[i] == doctest::Approx(g[(64 - i) % 64]).epsilon(1e-12));

  const int n = 16;
  const std::vector<double> v2 = sample_field(2, n, 4, 3);
  std::vector<double> r2(v2.size());
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) r2[a * n + b] = v2[((n - a) % n) * n + b];
  }
  const auto g2 = green_diag_oracle(v2, 2);
  const auto gr2 = green_diag_oracle(r2, 2);
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) CHECK(gr2[a * n + b] == doctest::Approx(g2[((n - a) % n) * n + b]).epsilon(1e-12));
  }
}

TEST_CASE("oracle converges at second order") {
  const auto g32 = scaled_diag(32);
  const auto g64 = scaled_diag(64);
  const auto g128 = scaled_diag(128);
  double d1 = 0.0;
  double d2 = 0.0;
  for (int i = 0; i < 32; ++i) {
    d1 = std::max(d1, std::abs(g32[i] - g64[2 * i]));
    d2 = std::max(d2, std::abs(g64[2 * i] - g128[4 * i]));
  }
  CHECK(d2 > 0.0);
  CHECK(d1 / d2 >= 3.0);
}

TEST_CASE("oracle errors") {
  CHECK_THROWS_AS(green_diag_oracle(std::vector<double>{1.0, 0.0, 1.0, 1.0}, 1), ValidationError);
  CHECK_THROWS_AS(green_diag_oracle(std::vector<double>{1.0, -2.0, 1.0, 1.0}, 1), ValidationError);
  CHECK_THROWS_AS(green_diag_oracle(std::vector<double>(2048, 1.0), 1), ValidationError);
  CHECK_THROWS_AS(green_diag_oracle(std::vector<double>(10, 1.0), 2), ValidationError);
}

TEST_CASE("interpolation reproduces the coarse samples") {
  std::mt19937_64 rng(2);
  for (int m : {4, 8, 16}) {
    const auto z = testing_support::random_vector(rng, static_cast<std::size_t>(m));
    const auto f = fourier_interpolate(z, m, 64, 1);
    for (int j = 0; j < m; ++j) CHECK(std::abs(f[j * (64 / m)] - z[j]) <= 1e-12);
  }
  const int m = 4;
  const auto z = testing_support::random_vector(rng, m * m);
  const auto f = fourier_interpolate(z, m, 16, 2);
  for (int a = 0; a < m; ++a) {
    for (int b = 0; b < m; ++b) CHECK(std::abs(f[(4 * a) * 16 + 4 * b] - z[a * m + b]) <= 1e-12);
  }
}

TEST_CASE("interpolation reproduces band-limited cosines") {
  const int m = 8;
  const int n = 64;
  std::vector<double> z(m);
  for (int j = 0; j < m; ++j) z[j] = std::cos(2.0 * std::numbers::pi * 3 * j / m);
  const auto f = fourier_interpolate(z, m, n, 1);
  for (int i = 0; i < n; ++i) CHECK(std::abs(f[i] - std::cos(2.0 * std::numbers::pi * 3 * i / n)) <= 1e-12);
}

TEST_CASE("zero coarse field exponentiates to one") {
  const auto f = field_from_coarse(std::vector<double>(8, 0.0), 8, 64, 1);
  for (double x : f) CHECK(x == 1.0);
  const auto f2 = field_from_coarse(std::vector<double>(16, 0.0), 4, 16, 2);
  for (double x : f2) CHECK(x == 1.0);
}

TEST_CASE("lognormal mean of the sampled field") {
  // Var of the interpolant at x is sum_j w_j(x)^2 = 1 - sin^2(pi m x) / m.
  const int m = 8;
  const int n = 64;
  double oracle = 0.0;
  for (int i = 0; i < n; ++i) {
    const double s = std::sin(std::numbers::pi * m * i / n);
    oracle += std::exp(0.5 * (1.0 - s * s / m));
  }
  oracle /= n;
  const int samples = 4000;
  double sum = 0.0;
  double sq = 0.0;
  for (int k = 0; k < samples; ++k) {
    const auto f = sample_field(1, n, m, 21, static_cast<std::uint64_t>(k));
    double avg = 0.0;
    for (double x : f) avg += x;
    avg /= n;
    sum += avg;
    sq += avg * avg;
  }
  const double mean = sum / samples;
  const double se = std::sqrt((sq / samples - mean * mean) / samples);
  CHECK(std::abs(mean - oracle) <= 4.0 * se);
  CHECK(oracle == doctest::Approx(std::exp(0.5)).epsilon(0.05));
}

TEST_CASE("sample_field errors and positivity") {
  CHECK_THROWS_AS(sample_field(1, 8, 16, 0), ValidationError);
  for (double x : sample_field(2, 16, 4, 5)) CHECK(x > 0.0);
}

TEST_CASE("datasets are deterministic in the seed") {
  DatasetDescriptor d;
  d.task = Task::Green1d;
  d.n = 32;
  d.coarse = 4;
  d.n_train = 6;
  d.n_test = 3;
  d.seed = 9;
  const Dataset a = make_dataset(d);
  const Dataset b = make_dataset(d, 3);
  CHECK(a == b);
  d.seed = 10;
  CHECK(!(make_dataset(d) == a));
  CHECK(a.train[0].input != a.test[0].input);
}

TEST_CASE("green1d targets are positive") {
  DatasetDescriptor d;
  d.n_train = 40;
  d.n_test = 10;
  d.seed = 4;
  const Dataset data = make_dataset(d);
  for (const auto* split : {&data.train, &data.test}) {
    for (const auto& s : *split) {
      CHECK(s.input.size() == 64);
      for (double x : s.input) CHECK(x > 0.0);
      for (double x : s.target) CHECK((std::isfinite(x) && x > 0.0));
    }
  }
}

TEST_CASE("dataset validation") {
  DatasetDescriptor d;
  d.n_train = 1;
  d.task = Task::Green2d;
  CHECK_THROWS_AS(make_dataset(d), ValidationError);
  d = DatasetDescriptor{};
  d.n_train = 1;
  d.n = 48;
  CHECK_THROWS_AS(make_dataset(d), ValidationError);
  d.n = 64;
  d.coarse = 128;
  CHECK_THROWS_AS(make_dataset(d), ValidationError);
  CHECK_THROWS_AS(parse_task("green3d"), ValidationError);
  CHECK(parse_task("smoke") == Task::Smoke);
}

TEST_CASE("smoke target") {
  std::vector<double> v(8, 0.0);
  v[3] = 1.0;
  const auto t = smoke_target(v, 1);
  CHECK(t[3] == doctest::Approx(std::tanh(0.25)));
  CHECK(t[2] == doctest::Approx(std::tanh(0.125)));
  CHECK(t[0] == 0.0);
}
