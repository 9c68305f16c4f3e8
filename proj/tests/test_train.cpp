#include <doctest.h>

#include <cmath>

#include "bcr/error.hpp"
#include "bcr/train.hpp"

using namespace bcr;
using namespace bcr::train;

namespace {

bcrnet::NetConfig small_config() {
  bcrnet::NetConfig c;
  c.p = 2;
  c.L = 5;
  c.L0 = 2;
  c.alpha = 2;
  c.K = 2;
  return c;
}

apps::Dataset smoke_data(int n_train, int n_test, std::uint64_t seed) {
  apps::DatasetDescriptor d;
  d.task = apps::Task::Smoke;
  d.n = 32;
  d.coarse = 8;
  d.n_train = n_train;
  d.n_test = n_test;
  d.seed = seed;
  return apps::make_dataset(d);
}

std::vector<std::vector<double>> values(const grad::ParamStore& p) {
  std::vector<std::vector<double>> out;
  for (const auto& x : p) out.push_back(x.value);
  return out;
}

}  // namespace

TEST_CASE("relative error") {
  CHECK(relative_l2(std::vector<double>{3, 4}, std::vector<double>{3, 4}) == 0.0);
  CHECK(relative_l2(std::vector<double>{0, 0}, std::vector<double>{3, 4}) == 1.0);
  CHECK(relative_l2(std::vector<double>{3, 5}, std::vector<double>{3, 4}) == doctest::Approx(0.2));
  CHECK_THROWS_AS(relative_l2(std::vector<double>{1}, std::vector<double>{0}), ValidationError);
}

TEST_CASE("default batch size") {
  CHECK(default_batch_size(5000) == 100);
  CHECK(default_batch_size(10) == 1);
  CHECK(default_batch_size(149) == 2);
}

TEST_CASE("standardization fit") {
  std::vector<apps::TaskSample> s{{{1, 3}, {2, 2}}, {{5, 7}, {2, 2}}};
  const Standardization n = Standardization::fit(s);
  CHECK(n.in_mean == 4.0);
  CHECK(n.in_scale == doctest::Approx(std::sqrt(5.0)));
  CHECK(n.out_mean == 2.0);
  CHECK(n.out_scale == 1.0);  // constant target keeps unit scale
}

TEST_CASE("targets equal to the model's own outputs stay fixed") {
  apps::Dataset data = smoke_data(6, 2, 1);
  Model model;
  model.net = bcrnet::build_bcrnet(small_config(), 3);
  for (auto* split : {&data.train, &data.test}) {
    for (auto& s : *split) s.target = model.predict(s.input);
  }
  const auto before = values(model.net.params());
  TrainOptions o;
  o.epochs = 3;
  o.batch_size = 2;
  const TrainResult r = train_model(model, data, o, 5);
  CHECK(r.history.front().loss == 0.0);
  CHECK(r.history.front().train_eps == 0.0);
  CHECK(values(r.model.net.params()) == before);
  CHECK(r.steps == 9);
}

TEST_CASE("training is bitwise reproducible and thread-count independent") {
  const apps::Dataset data = smoke_data(20, 5, 2);
  TrainOptions o;
  o.epochs = 2;
  o.batch_size = 4;
  const TrainResult a = train_loop(small_config(), data, o, 11);
  const TrainResult b = train_loop(small_config(), data, o, 11);
  o.threads = 3;
  const TrainResult c = train_loop(small_config(), data, o, 11);
  REQUIRE(a.history.size() == 3);
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    CHECK(a.history[i].loss == b.history[i].loss);
    CHECK(a.history[i].test_eps == b.history[i].test_eps);
    CHECK(a.history[i].loss == c.history[i].loss);
  }
  CHECK(values(a.model.net.params()) == values(b.model.net.params()));
  CHECK(values(a.model.net.params()) == values(c.model.net.params()));
}

TEST_CASE("training lowers the smoke task error") {
  const apps::Dataset data = smoke_data(100, 20, 3);
  TrainOptions o;
  o.epochs = 30;
  o.batch_size = 10;
  o.nadam.lr = 3e-3;
  const TrainResult r = train_loop(small_config(), data, o, 4);
  CHECK(r.history.back().train_eps < 0.5 * r.history.front().train_eps);
  CHECK(r.history.back().test_eps < 0.5 * r.history.front().test_eps);
  for (const auto& m : r.history) CHECK(m.loss >= 0.0);
}

TEST_CASE("step cap and early stop") {
  const apps::Dataset data = smoke_data(10, 0, 4);
  TrainOptions o;
  o.epochs = 100;
  o.batch_size = 3;
  o.max_steps = 7;
  const TrainResult r = train_loop(small_config(), data, o, 1);
  CHECK(r.steps == 7);
  CHECK(r.history.size() == 3);  // epoch 0, one full epoch of 4 steps, then 3 steps
  o.max_steps = 0;
  o.target_train_eps = 10.0;
  CHECK(train_loop(small_config(), data, o, 1).history.size() == 1);
}

TEST_CASE("summary of repeats") {
  std::vector<TrainResult> runs(3);
  const double test[3] = {0.1, 0.3, 0.2};
  for (int i = 0; i < 3; ++i) {
    EpochMetrics m;
    m.train_eps = 0.1 * i;
    m.test_eps = test[i];
    runs[i].history.push_back(m);
  }
  const RepeatSummary s = summarize(runs);
  CHECK(s.mean_test == doctest::Approx(0.2));
  CHECK(s.mean_train == doctest::Approx(0.1));
  CHECK(s.spread_test == doctest::Approx(0.2));
}

TEST_CASE("training rejects empty data") {
  apps::Dataset empty;
  CHECK_THROWS_AS(train_loop(small_config(), empty, TrainOptions{}, 1), ValidationError);
}
