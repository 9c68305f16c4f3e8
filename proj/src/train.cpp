#include "bcr/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>
#include <thread>

#include "bcr/error.hpp"

namespace bcr::train {
namespace {

using Clock = std::chrono::steady_clock;

Tensor normalized_input(const Model& model, std::span<const double> input) {
  const std::vector<int> ext = model.net.input_extents();
  std::size_t n = 1;
  for (int e : ext) n *= static_cast<std::size_t>(e);
  if (input.size() != n) {
    throw ValidationError("model expects " + std::to_string(n) + " input values, got " +
                          std::to_string(input.size()));
  }
  std::vector<double> x(input.begin(), input.end());
  for (double& v : x) v = (v - model.norm.in_mean) / model.norm.in_scale;
  return Tensor(ext, 1, std::move(x));
}

// Runs fn(i) for i in [0, count) over `threads` workers, rethrowing the
// first failure.
template <typename Fn>
void parallel_for(std::size_t count, int threads, Fn fn) {
  const std::size_t workers = std::min<std::size_t>(std::max(1, threads), count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < count; i += workers) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

}  // namespace

Standardization Standardization::fit(const std::vector<apps::TaskSample>& samples) {
  if (samples.empty()) throw ValidationError("standardization needs at least one sample");
  auto moments = [&](bool target) {
    double sum = 0.0;
    std::size_t count = 0;
    for (const auto& s : samples) {
      for (double v : target ? s.target : s.input) sum += v;
      count += (target ? s.target : s.input).size();
    }
    const double mean = sum / static_cast<double>(count);
    double var = 0.0;
    for (const auto& s : samples) {
      for (double v : target ? s.target : s.input) var += (v - mean) * (v - mean);
    }
    const double sd = std::sqrt(var / static_cast<double>(count));
    return std::pair<double, double>{mean, sd > 0.0 ? sd : 1.0};
  };
  Standardization n;
  std::tie(n.in_mean, n.in_scale) = moments(false);
  std::tie(n.out_mean, n.out_scale) = moments(true);
  return n;
}

std::vector<double> Model::predict(std::span<const double> input) const {
  const Tensor y = net.evaluate(normalized_input(*this, input));
  std::vector<double> out(y.values());
  for (double& v : out) v = v * norm.out_scale + norm.out_mean;
  return out;
}

double relative_l2(std::span<const double> pred, std::span<const double> target) {
  if (pred.size() != target.size()) throw ValidationError("relative_l2: length mismatch");
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    num += (pred[i] - target[i]) * (pred[i] - target[i]);
    den += target[i] * target[i];
  }
  if (den == 0.0) throw ValidationError("relative_l2: target has zero norm");
  return std::sqrt(num / den);
}

double mean_relative_error(const Model& model, const std::vector<apps::TaskSample>& samples,
                           int threads) {
  if (samples.empty()) return 0.0;
  std::vector<double> eps(samples.size());
  parallel_for(samples.size(), threads, [&](std::size_t i) {
    eps[i] = relative_l2(model.predict(samples[i].input), samples[i].target);
  });
  double acc = 0.0;
  for (double e : eps) acc += e;
  return acc / static_cast<double>(samples.size());
}

int default_batch_size(std::size_t n_train) {
  return std::max(1, static_cast<int>(std::floor(0.02 * static_cast<double>(n_train))));
}

double batch_gradient(const Model& model, const std::vector<apps::TaskSample>& samples,
                      std::span<const std::size_t> indices, grad::Gradients& grads, int threads) {
  const std::size_t B = indices.size();
  if (B == 0) throw ValidationError("batch_gradient: empty batch");
  std::vector<grad::Gradients> per(B);
  std::vector<double> losses(B);
  const grad::ParamStore shape = model.net.params();
  parallel_for(B, threads, [&](std::size_t b) {
    const apps::TaskSample& s = samples[indices[b]];
    bcrnet::Trace trace;
    const Tensor y = model.net.forward(normalized_input(model, s.input), trace);
    std::vector<double> t(s.target);
    for (double& v : t) v = (v - model.norm.out_mean) / model.norm.out_scale;
    const grad::Loss loss = grad::mse_loss(y, Tensor(y.extents(), 1, std::move(t)));
    per[b] = grad::zero_gradients(shape);
    model.net.backward(trace, loss.grad, per[b]);
    losses[b] = loss.value;
  });
  grads = grad::zero_gradients(shape);
  double total = 0.0;
  for (std::size_t b = 0; b < B; ++b) {
    total += losses[b];
    for (std::size_t k = 0; k < grads.size(); ++k) {
      for (std::size_t i = 0; i < grads[k].size(); ++i) grads[k][i] += per[b][k][i];
    }
  }
  const double scale = 1.0 / static_cast<double>(B);
  for (auto& g : grads) {
    for (double& v : g) v *= scale;
  }
  return total * scale;
}

TrainResult train_model(Model model, const apps::Dataset& data, const TrainOptions& options,
                        std::uint64_t seed) {
  if (data.train.empty()) throw ValidationError("training set is empty");
  if (options.epochs < 0) throw ValidationError("epochs must be non-negative");
  const Clock::time_point start = Clock::now();
  TrainResult result;
  const int batch = options.batch_size > 0 ? options.batch_size : default_batch_size(data.train.size());
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    0x73687566u};
  std::mt19937_64 rng(seq);

  grad::ParamStore params = model.net.params();
  grad::OptimizerState opt = grad::make_optimizer(params, options.nadam);
  std::vector<std::size_t> order(data.train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  auto record = [&](int epoch, double loss) {
    EpochMetrics m;
    m.epoch = epoch;
    m.train_eps = mean_relative_error(model, data.train, options.threads);
    m.test_eps = mean_relative_error(model, data.test, options.threads);
    m.loss = loss;
    m.wall_time_s = seconds_since(start);
    result.history.push_back(m);
    if (options.on_epoch) options.on_epoch(m);
    return m;
  };

  {
    std::vector<std::size_t> all(order);
    grad::Gradients g;
    const double loss0 = batch_gradient(model, data.train, all, g, options.threads);
    const EpochMetrics m = record(0, loss0);
    if (options.target_train_eps > 0.0 && m.train_eps <= options.target_train_eps) {
      result.model = std::move(model);
      return result;
    }
  }

  grad::Gradients g;
  bool done = false;
  for (int epoch = 1; epoch <= options.epochs && !done; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    int batches = 0;
    for (std::size_t first = 0; first < order.size(); first += static_cast<std::size_t>(batch)) {
      const std::size_t count = std::min<std::size_t>(static_cast<std::size_t>(batch), order.size() - first);
      const std::span<const std::size_t> idx(order.data() + first, count);
      loss_sum += batch_gradient(model, data.train, idx, g, options.threads);
      ++batches;
      grad::nadam_step(opt, params, g);
      model.net.set_params(params);
      ++result.steps;
      if (options.max_steps > 0 && result.steps >= options.max_steps) {
        done = true;
        break;
      }
    }
    const EpochMetrics m = record(epoch, loss_sum / batches);
    if (options.target_train_eps > 0.0 && m.train_eps <= options.target_train_eps) done = true;
  }
  result.model = std::move(model);
  return result;
}

TrainResult train_loop(const bcrnet::NetConfig& cfg, const apps::Dataset& data,
                       const TrainOptions& options, std::uint64_t seed) {
  if (data.train.empty()) throw ValidationError("training set is empty");
  Model model;
  model.net = bcrnet::build_bcrnet(cfg, seed);
  model.norm = Standardization::fit(data.train);
  return train_model(std::move(model), data, options, seed);
}

RepeatSummary summarize(const std::vector<TrainResult>& runs) {
  RepeatSummary s;
  if (runs.empty()) return s;
  for (const auto& r : runs) {
    s.train_eps.push_back(r.history.back().train_eps);
    s.test_eps.push_back(r.history.back().test_eps);
  }
  const double n = static_cast<double>(runs.size());
  for (std::size_t i = 0; i < runs.size(); ++i) {
    s.mean_train += s.train_eps[i] / n;
    s.mean_test += s.test_eps[i] / n;
  }
  const auto [lo, hi] = std::minmax_element(s.test_eps.begin(), s.test_eps.end());
  s.spread_test = *hi - *lo;
  return s;
}

}  // namespace bcr::train
