#include <doctest.h>

#include <cmath>
#include <random>

#include "bcr/error.hpp"
#include "bcr/layers.hpp"
#include "bcr/wavelet.hpp"
#include "support.hpp"

using namespace bcr;
using namespace bcr::layers;
using testing_support::random_vector;

namespace {

Tensor random_tensor(std::mt19937_64& rng, std::vector<int> extents, int channels) {
  std::size_t n = static_cast<std::size_t>(channels);
  for (int e : extents) n *= static_cast<std::size_t>(e);
  return Tensor(std::move(extents), channels, random_vector(rng, n));
}

void randomize(std::mt19937_64& rng, LayerSpec& s) {
  s.weights = random_vector(rng, s.weights.size());
  s.bias = random_vector(rng, s.bias.size());
}

}  // namespace

TEST_CASE("activations") {
  CHECK(activate(Activation::Relu, -1.0) == 0.0);
  CHECK(activate(Activation::Relu, 2.5) == 2.5);
  CHECK(activate(Activation::Sigmoid, 0.0) == 0.5);
  CHECK(activate(Activation::Id, -3.25) == -3.25);
  CHECK(parse_activation("relu") == Activation::Relu);
  CHECK_THROWS_AS(parse_activation("tanh"), ValidationError);
}

TEST_CASE("unit window identity conv") {
  std::mt19937_64 rng(1);
  LayerSpec s = conv_layer(1, 3, 3, 1, 1, 0, Activation::Id);
  for (int c = 0; c < 3; ++c) s.weights[c * 3 + c] = 1.0;
  const Tensor x = random_tensor(rng, {16}, 3);
  CHECK(conv_forward(x, s) == x);
}

TEST_CASE("conv matches the direct formula") {
  std::mt19937_64 rng(2);
  LayerSpec s = conv_layer(1, 2, 3, 5, 2, -2, Activation::Sigmoid);
  randomize(rng, s);
  const Tensor x = random_tensor(rng, {16}, 2);
  const Tensor y = conv_forward(x, s);
  REQUIRE(y.extent(0) == 8);
  for (int i = 0; i < 8; ++i) {
    for (int o = 0; o < 3; ++o) {
      double z = s.bias[o];
      for (int t = 0; t < 5; ++t) {
        const int j = ((i * 2 - 2 + t) % 16 + 16) % 16;
        for (int c = 0; c < 2; ++c) z += s.weights[(t * 3 + o) * 2 + c] * x.at(j, c);
      }
      CHECK(y.at(i, o) == doctest::Approx(1.0 / (1.0 + std::exp(-z))).epsilon(1e-14));
    }
  }
}

TEST_CASE("conv translation equivariance") {
  std::mt19937_64 rng(3);
  for (int dim : {1, 2}) {
    for (int stride : {1, 2}) {
      LayerSpec s = conv_layer(dim, 2, 3, 3, stride, -1, Activation::Relu);
      randomize(rng, s);
      const std::vector<int> ext = dim == 1 ? std::vector<int>{32} : std::vector<int>{8, 8};
      const Tensor x = random_tensor(rng, ext, 2);
      CHECK(conv_forward(cyclic_shift(x, stride), s) == cyclic_shift(conv_forward(x, s), 1));
    }
  }
}

TEST_CASE("locally connected with tied weights equals conv bitwise") {
  std::mt19937_64 rng(4);
  for (int dim : {1, 2}) {
    const std::vector<int> ext = dim == 1 ? std::vector<int>{16} : std::vector<int>{8, 8};
    LayerSpec c = conv_layer(dim, 3, 2, 3, 2, -1, Activation::Sigmoid);
    randomize(rng, c);
    LayerSpec l = lc_layer(ext, 3, 2, 3, 2, -1, Activation::Sigmoid);
    const std::size_t per = c.weights.size();
    for (std::size_t i = 0; i < l.out_positions(); ++i) {
      std::copy(c.weights.begin(), c.weights.end(), l.weights.begin() + i * per);
      std::copy(c.bias.begin(), c.bias.end(), l.bias.begin() + i * 2);
    }
    const Tensor x = random_tensor(rng, ext, 3);
    CHECK(lc_forward(x, l) == conv_forward(x, c));
  }
}

TEST_CASE("locally connected layer computes a periodic banded matvec") {
  std::mt19937_64 rng(5);
  const int n = 16;
  const int w = 5;
  const int b = 2;
  LayerSpec s = lc_layer({n}, 1, 1, w, 1, -b, Activation::Id);
  s.weights = random_vector(rng, s.weights.size());
  Eigen::MatrixXd band = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int t = 0; t < w; ++t) band(i, ((i + t - b) % n + n) % n) += s.weights[i * w + t];
  }
  const Tensor x = random_tensor(rng, {n}, 1);
  const auto want = testing_support::matvec(band, x.values());
  const Tensor y = lc_forward(x, s);
  for (int i = 0; i < n; ++i) CHECK(y[i] == doctest::Approx(want[i]).epsilon(1e-13));
}

TEST_CASE("zero weights with bias through relu") {
  LayerSpec s = lc_layer({8}, 2, 2, 3, 1, -1, Activation::Relu);
  for (std::size_t i = 0; i < s.bias.size(); ++i) s.bias[i] = (i % 2 == 0) ? 0.75 : -0.5;
  const Tensor y = lc_forward(Tensor({8}, 2, 1.0), s);
  for (int i = 0; i < 8; ++i) {
    CHECK(y.at(i, 0) == 0.75);
    CHECK(y.at(i, 1) == 0.0);
  }
}

TEST_CASE("dense layer") {
  std::mt19937_64 rng(6);
  const int n = 8;
  LayerSpec eye = dense_layer({n}, 1, 1, Activation::Id);
  for (int i = 0; i < n; ++i) eye.weights[i * n + i] = 1.0;
  const Tensor x = random_tensor(rng, {n}, 1);
  CHECK(dense_forward(x, eye) == x);

  const Eigen::MatrixXd a = testing_support::random_matrix(rng, n);
  LayerSpec s = dense_layer({n}, 1, 1, Activation::Id);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) s.weights[i * n + j] = a(i, j);
  }
  const auto want = testing_support::matvec(a, x.values());
  const Tensor y = dense_forward(x, s);
  for (int i = 0; i < n; ++i) CHECK(y[i] == doctest::Approx(want[i]).epsilon(1e-13));

  LayerSpec sig = dense_layer({4, 4}, 2, 3, Activation::Sigmoid);
  const Tensor z = dense_forward(random_tensor(rng, {4, 4}, 2), sig);
  for (double v : z.values()) CHECK(v == 0.5);
}

TEST_CASE("positive homogeneity in the weights") {
  std::mt19937_64 rng(7);
  LayerSpec s = conv_layer(2, 2, 2, 3, 1, -1, Activation::Id);
  s.weights = random_vector(rng, s.weights.size());
  LayerSpec t = s;
  for (double& w : t.weights) w *= 3.0;
  const Tensor x = random_tensor(rng, {8, 8}, 2);
  const Tensor a = conv_forward(x, s);
  const Tensor b = conv_forward(x, t);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(b[i] == doctest::Approx(3.0 * a[i]).epsilon(1e-14));
}

TEST_CASE("interleave") {
  Tensor x({4}, 2, std::vector<double>{0, 10, 1, 11, 2, 12, 3, 13});
  const Tensor y = interleave(x, 2);
  CHECK(y.extent(0) == 8);
  CHECK(y.channels() == 1);
  CHECK(y.values() == std::vector<double>{0, 10, 1, 11, 2, 12, 3, 13});
  CHECK(deinterleave(y, 2) == x);

  std::mt19937_64 rng(8);
  const Tensor z = random_tensor(rng, {4, 4}, 8);
  const Tensor up = interleave(z, 4);
  CHECK(up.extent(0) == 8);
  CHECK(up.channels() == 2);
  CHECK(up.at(3 * 8 + 4, 1) == z.at(1 * 4 + 2, 1 * 4 + 2 * 1 + 0));
  CHECK(deinterleave(up, 4) == z);
  CHECK_THROWS_AS(interleave(Tensor({4}, 3), 2), ValidationError);
}

TEST_CASE("stride must divide the extent") {
  LayerSpec s = conv_layer(1, 1, 1, 2, 2, 0, Activation::Id);
  CHECK_THROWS_AS(conv_forward(Tensor({7}, 1), s), ValidationError);
  CHECK_THROWS_AS(conv_forward(Tensor({8}, 2), s), ValidationError);
}

TEST_CASE("wavelet convs reproduce the transform steps") {
  std::mt19937_64 rng(9);
  const int alpha = 2;
  for (int p = 1; p <= 6; ++p) {
    CAPTURE(p);
    const auto& f = wavelet::make_filters(p);
    const int n = 32;
    const Tensor x = random_tensor(rng, {n}, alpha);
    const Tensor y = conv_forward(x, wavelet_analysis_conv(f, 1, alpha));
    const Tensor back = interleave(conv_forward(y, wavelet_synthesis_conv(f, 1, alpha)), 2);
    CHECK(max_abs_diff(back.values(), x.values()) <= 1e-12);
    for (int c = 0; c < alpha; ++c) {
      std::vector<double> xc(n);
      for (int i = 0; i < n; ++i) xc[i] = x.at(i, c);
      const auto s = wavelet::forward_step(xc, f);
      for (int k = 0; k < n / 2; ++k) {
        CHECK(std::abs(y.at(k, c) - s.d[k]) <= 1e-12);
        CHECK(std::abs(y.at(k, alpha + c) - s.v[k]) <= 1e-12);
      }
      std::vector<double> d(n / 2);
      std::vector<double> v(n / 2);
      for (int k = 0; k < n / 2; ++k) {
        d[k] = y.at(k, c);
        v[k] = y.at(k, alpha + c);
      }
      const auto fine = wavelet::inverse_step(d, v, f);
      for (int i = 0; i < n; ++i) CHECK(std::abs(back.at(i, c) - fine[i]) <= 1e-12);
    }
  }
}

TEST_CASE("2D wavelet convs reproduce the separable steps") {
  std::mt19937_64 rng(10);
  for (int p = 1; p <= 4; ++p) {
    const auto& f = wavelet::make_filters(p);
    const int n = 16;
    const int m = n / 2;
    const Tensor x = random_tensor(rng, {n, n}, 1);
    const Tensor y = conv_forward(x, wavelet_analysis_conv(f, 2, 1));
    std::vector<double> ref(static_cast<std::size_t>(n) * n);
    wavelet::forward_step_2d_into(x.values(), n, ref, f);
    for (int ch = 0; ch < 4; ++ch) {
      for (int k = 0; k < m * m; ++k) {
        CHECK(std::abs(y.at(k, ch) - ref[static_cast<std::size_t>(ch) * m * m + k]) <= 1e-12);
      }
    }
    const Tensor back = interleave(conv_forward(y, wavelet_synthesis_conv(f, 2, 1)), 4);
    CHECK(max_abs_diff(back.values(), x.values()) <= 1e-12);
  }
}
