#include <doctest.h>

#include <cmath>
#include <random>

#include "bcr/bcrnet.hpp"
#include "bcr/error.hpp"
#include "bcr/nsform.hpp"
#include "support.hpp"

using namespace bcr;
using bcrnet::NetConfig;
using bcrnet::NetMode;
using testing_support::random_matrix;
using testing_support::random_vector;
using testing_support::rel_error;

namespace {

std::vector<double> eval(const bcrnet::Network& net, const std::vector<double>& v, int dim) {
  return net.evaluate(field_tensor(v, dim)).values();
}

// Weight count written out from the per-level sums, independent of the library.
std::uint64_t formula_weights(const NetConfig& c) {
  const std::uint64_t a = c.alpha;
  const std::uint64_t C = (1u << c.dim) * a;
  auto pw = [](std::uint64_t b, int e) {
    std::uint64_t r = 1;
    for (int i = 0; i < e; ++i) r *= b;
    return r;
  };
  std::uint64_t total = 0;
  for (int l = c.L0; l < c.L; ++l) {
    total += pw(2 * c.p, c.dim) * a * C;  // analysis
    total += pw(c.p, c.dim) * C * C;      // synthesis
    const std::uint64_t band = pw(c.n_b, c.dim) * C * C;
    total += c.mode == NetMode::Lc ? c.K * pw(2, l * c.dim) * band : c.K * band;
  }
  const std::uint64_t coarse = pw(2, c.L0 * c.dim);
  total += c.mode == NetMode::Lc ? c.K * coarse * coarse * a * a : c.K * coarse * a * a;
  return total;
}

NetConfig random_config(std::mt19937_64& rng, int dim, NetMode mode) {
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  NetConfig c;
  c.dim = dim;
  c.mode = mode;
  c.p = pick(1, dim == 1 ? 3 : 2);
  c.L0 = wavelet::min_coarse_level(c.p) + pick(0, 1);
  c.L = c.L0 + pick(1, dim == 1 ? 3 : 2);
  c.n_b = 2 * pick(0, 2) + 1;
  c.alpha = pick(1, 3);
  c.K = pick(1, 3);
  return c;
}

}  // namespace

TEST_CASE("linear net from the identity is the identity") {
  const nsform::NonstandardForm ns = nsform::decompose_operator(Eigen::MatrixXd::Identity(64, 64), 3, 3, 5);
  const bcrnet::Network net = bcrnet::build_linear_net(ns);
  std::mt19937_64 rng(1);
  const auto v = random_vector(rng, 64);
  const auto u = eval(net, v, 1);
  for (std::size_t i = 0; i < 64; ++i) CHECK(std::abs(u[i] - v[i]) <= 1e-12);
}

TEST_CASE("full band linear net matches the dense product") {
  std::mt19937_64 rng(2);
  const Eigen::MatrixXd A = random_matrix(rng, 64);
  const nsform::NonstandardForm ns = nsform::decompose_operator(A, 3, 3, nsform::full_band(6));
  const bcrnet::Network net = bcrnet::build_linear_net(ns);
  for (int trial = 0; trial < 10; ++trial) {
    const auto v = random_vector(rng, 64);
    CHECK(rel_error(eval(net, v, 1), testing_support::matvec(A, v)) <= 1e-10);
  }
}

TEST_CASE("truncated linear net agrees with the truncated form") {
  std::mt19937_64 rng(3);
  const nsform::NonstandardForm ns = nsform::decompose_operator(random_matrix(rng, 64), 3, 3, 5);
  const bcrnet::Network net = bcrnet::build_linear_net(ns);
  for (int trial = 0; trial < 10; ++trial) {
    const auto v = random_vector(rng, 64);
    CHECK(rel_error(eval(net, v, 1), nsform::apply(ns, v)) <= 1e-12);
  }
}

TEST_CASE("linear net equals the nonstandard matvec on 50 instances") {
  std::mt19937_64 rng(4);
  struct Case {
    int n, p, L0, dim;
  };
  const std::vector<Case> cases = {{32, 2, 2, 1}, {64, 3, 3, 1}, {128, 3, 3, 1}, {32, 2, 2, 2}};
  int instances = 0;
  for (const Case& c : cases) {
    const int L = wavelet::exact_log2(static_cast<std::size_t>(c.n));
    const int size = c.dim == 1 ? c.n : c.n * c.n;
    for (int nb : {3, nsform::full_band(L)}) {
      const int pairs = c.dim == 1 ? 7 : 4;
      const nsform::NonstandardForm ns =
          nsform::decompose_operator(random_matrix(rng, size), c.p, c.L0, nb, c.dim);
      const bcrnet::Network net = bcrnet::build_linear_net(ns);
      for (int t = 0; t < pairs; ++t, ++instances) {
        CAPTURE(c.n);
        CAPTURE(c.dim);
        CAPTURE(nb);
        const auto v = random_vector(rng, static_cast<std::size_t>(size));
        CHECK(rel_error(eval(net, v, c.dim), nsform::apply(ns, v)) <= 1e-12);
      }
    }
  }
  CHECK(instances == 50);
}

TEST_CASE("bcr-net with alpha 1, K 1 and identity activation contains the linear net") {
  std::mt19937_64 rng(5);
  for (int dim : {1, 2}) {
    const int n = dim == 1 ? 64 : 16;
    const int size = dim == 1 ? n : n * n;
    const nsform::NonstandardForm ns = nsform::decompose_operator(random_matrix(rng, size), 2, 2, 3, dim);
    NetConfig cfg;
    cfg.dim = dim;
    cfg.p = 2;
    cfg.L = ns.L;
    cfg.L0 = 2;
    cfg.n_b = 3;
    cfg.alpha = 1;
    cfg.K = 1;
    cfg.activation = layers::Activation::Id;
    bcrnet::Network net = bcrnet::build_bcrnet(cfg, 77);
    bcrnet::load_nonstandard_form(net, ns);
    const bcrnet::Network linear = bcrnet::build_linear_net(ns);
    const auto v = random_vector(rng, static_cast<std::size_t>(size));
    CHECK(eval(net, v, dim) == eval(linear, v, dim));
  }
}

TEST_CASE("trace shapes follow the level schedule") {
  for (int dim : {1, 2}) {
    NetConfig cfg;
    cfg.dim = dim;
    cfg.p = 2;
    cfg.L = dim == 1 ? 6 : 4;
    cfg.L0 = 2;
    cfg.alpha = 3;
    cfg.K = 2;
    const bcrnet::Network net = bcrnet::build_bcrnet(cfg, 1);
    bcrnet::Trace tr;
    const int side = 1 << cfg.L;
    const Tensor x(dim == 1 ? std::vector<int>{side} : std::vector<int>{side, side}, 1, 1.0);
    const Tensor y = net.forward(x, tr);
    CHECK(y.extents() == x.extents());
    CHECK(y.channels() == 1);
    for (int l = cfg.L0; l < cfg.L; ++l) {
      const std::size_t i = static_cast<std::size_t>(l - cfg.L0);
      CHECK(tr.xi[i].extents() == cfg.extents(l));
      CHECK(tr.xi[i].channels() == cfg.channels());
      CHECK(tr.summed[i].channels() == cfg.channels());
      CHECK(tr.down_in[i].extents() == cfg.extents(l + 1));
      CHECK(tr.down_in[i].channels() == cfg.alpha);
    }
    CHECK(tr.u_top.extents() == cfg.extents(cfg.L));
    CHECK(tr.u_top.channels() == cfg.alpha);
  }
}

TEST_CASE("worked parameter counts") {
  NetConfig linear;
  linear.L = 6;
  linear.L0 = 2;
  linear.p = 3;
  linear.n_b = 3;
  linear.alpha = 1;
  linear.K = 1;
  linear.transform_init = bcrnet::TransformInit::Random;  // L0 = 2 is below the wavelet bound for p = 3
  CHECK(bcrnet::param_count(linear).weights == 832);
  CHECK(bcrnet::build_structure(linear).weight_tally() == 832);

  NetConfig net = linear;
  net.alpha = 2;
  net.K = 5;
  CHECK(bcrnet::param_count(net).weights == 15104);
  CHECK(bcrnet::build_bcrnet(net, 3).weight_tally() == 15104);
}

TEST_CASE("parameter formula equals the built tally") {
  std::mt19937_64 rng(6);
  for (int dim : {1, 2}) {
    for (NetMode mode : {NetMode::Lc, NetMode::Conv}) {
      for (int t = 0; t < 5; ++t) {
        const NetConfig cfg = random_config(rng, dim, mode);
        CAPTURE(dim);
        CAPTURE(bcrnet::to_string(mode));
        const bcrnet::Network net = bcrnet::build_bcrnet(cfg, 1);
        const bcrnet::ParamCount pc = bcrnet::param_count(cfg);
        CHECK(pc.weights == net.weight_tally());
        CHECK(pc.weights == formula_weights(cfg));
        CHECK(pc.biases == net.bias_tally());
      }
    }
  }
}

TEST_CASE("conv mode is equivariant to shifts by the total stride") {
  std::mt19937_64 rng(7);
  for (int dim : {1, 2}) {
    NetConfig cfg;
    cfg.dim = dim;
    cfg.mode = NetMode::Conv;
    cfg.p = 2;
    cfg.L = dim == 1 ? 7 : 5;
    cfg.L0 = 2;
    cfg.alpha = 2;
    cfg.K = 2;
    cfg.transform_init = bcrnet::TransformInit::Random;
    const bcrnet::Network net = bcrnet::build_bcrnet(cfg, 11);
    const int side = 1 << cfg.L;
    const std::size_t size = dim == 1 ? side : static_cast<std::size_t>(side) * side;
    const Tensor x = field_tensor(random_vector(rng, size), dim);
    const int shift = 1 << (cfg.L - cfg.L0);
    const Tensor a = cyclic_shift(net.evaluate(x), shift);
    const Tensor b = net.evaluate(cyclic_shift(x, shift));
    CHECK(max_abs_diff(a.values(), b.values()) <= 1e-12);
    CHECK(l2_norm(a.values()) > 0.0);
  }
}

TEST_CASE("lc mode is not equivariant") {
  std::mt19937_64 rng(8);
  NetConfig cfg;
  cfg.p = 2;
  cfg.L = 7;
  cfg.L0 = 2;
  cfg.alpha = 2;
  cfg.K = 2;
  const bcrnet::Network net = bcrnet::build_bcrnet(cfg, 12);
  const Tensor x = field_tensor(random_vector(rng, 128), 1);
  const int shift = 1 << (cfg.L - cfg.L0);
  const Tensor a = cyclic_shift(net.evaluate(x), shift);
  const Tensor b = net.evaluate(cyclic_shift(x, shift));
  CHECK(max_abs_diff(a.values(), b.values()) >= 1e-3);
}

TEST_CASE("network backward matches central differences") {
  std::mt19937_64 rng(9);
  for (int dim : {1, 2}) {
    for (NetMode mode : {NetMode::Lc, NetMode::Conv}) {
      for (auto act : {layers::Activation::Relu, layers::Activation::Sigmoid}) {
        NetConfig cfg;
        cfg.dim = dim;
        cfg.mode = mode;
        cfg.activation = act;
        cfg.p = 2;
        cfg.L = dim == 1 ? 5 : 4;
        cfg.L0 = 2;
        cfg.alpha = 2;
        cfg.K = 2;
        bcrnet::Network net = bcrnet::build_bcrnet(cfg, 13);
        grad::ParamStore params = net.params();
        for (std::size_t i = 0; i < params.size(); ++i) params[i].value = random_vector(rng, params[i].value.size());
        net.set_params(params);
        const int side = 1 << cfg.L;
        const std::size_t size = dim == 1 ? side : static_cast<std::size_t>(side) * side;
        const Tensor x = field_tensor(random_vector(rng, size), dim);
        const Tensor r = field_tensor(random_vector(rng, size), dim);
        bcrnet::Trace tr;
        net.forward(x, tr);
        grad::Gradients g = grad::zero_gradients(params);
        net.backward(tr, r, g);
        auto objective = [&](const grad::ParamStore& ps) {
          bcrnet::Network copy = net;
          copy.set_params(ps);
          const Tensor y = copy.evaluate(x);
          double s = 0.0;
          for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * r[i];
          return s;
        };
        const double delta = 1e-6;
        for (int trial = 0; trial < 5; ++trial) {
          grad::ParamStore plus = params;
          grad::ParamStore minus = params;
          double an = 0.0;
          for (std::size_t k = 0; k < params.size(); ++k) {
            const auto e = random_vector(rng, params[k].value.size());
            for (std::size_t i = 0; i < e.size(); ++i) {
              plus[k].value[i] += delta * e[i];
              minus[k].value[i] -= delta * e[i];
              an += g[k][i] * e[i];
            }
          }
          const double fd = (objective(plus) - objective(minus)) / (2 * delta);
          CAPTURE(dim);
          CAPTURE(bcrnet::to_string(mode));
          CHECK(std::abs(fd - an) <= 1e-6 * std::max(std::abs(fd), std::abs(an)));
        }
      }
    }
  }
}

TEST_CASE("invalid configs name the violated invariant") {
  NetConfig c;
  c.n_b = 4;
  CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("n_b"), ValidationError);
  c = NetConfig{};
  c.L0 = 2;  // p = 3 needs L0 >= 3 for wavelet-initialized transforms
  CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("L0"), ValidationError);
  c.transform_init = bcrnet::TransformInit::Random;
  CHECK_NOTHROW(c.validate());
  c = NetConfig{};
  c.alpha = 0;
  CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("alpha"), ValidationError);
  c = NetConfig{};
  c.K = 0;
  CHECK_THROWS_AS(bcrnet::build_bcrnet(c, 1), ValidationError);
}

TEST_CASE("set_params rejects mismatched shapes") {
  bcrnet::Network net = bcrnet::build_bcrnet(NetConfig{}, 1);
  grad::ParamStore p = net.params();
  p[0].value.pop_back();
  CHECK_THROWS_WITH_AS(net.set_params(p), doctest::Contains(p[0].name.c_str()), ValidationError);
}

TEST_CASE("build is deterministic in the seed") {
  const NetConfig cfg;
  const auto a = bcrnet::build_bcrnet(cfg, 5).params();
  const auto b = bcrnet::build_bcrnet(cfg, 5).params();
  const auto c = bcrnet::build_bcrnet(cfg, 6).params();
  bool same = true;
  bool differ = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    same = same && a[i].value == b[i].value;
    differ = differ || a[i].value != c[i].value;
  }
  CHECK(same);
  CHECK(differ);
}
