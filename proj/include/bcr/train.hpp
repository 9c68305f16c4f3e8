#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "bcr/apps.hpp"
#include "bcr/bcrnet.hpp"
#include "bcr/grad.hpp"

namespace bcr::train {

/// Scalar affine maps applied to inputs before the network and undone on
/// its outputs. Fitted on the training split.
struct Standardization {
  double in_mean = 0.0;
  double in_scale = 1.0;
  double out_mean = 0.0;
  double out_scale = 1.0;

  static Standardization fit(const std::vector<apps::TaskSample>& samples);
};

struct Model {
  bcrnet::Network net;
  Standardization norm;

  std::vector<double> predict(std::span<const double> input) const;
};

/// ||pred - target||_2 / ||target||_2.
double relative_l2(std::span<const double> pred, std::span<const double> target);

/// Relative error averaged over the samples; 0 for an empty set.
double mean_relative_error(const Model& model, const std::vector<apps::TaskSample>& samples,
                           int threads = 1);

struct EpochMetrics {
  int epoch = 0;
  double train_eps = 0.0;
  double test_eps = 0.0;
  double loss = 0.0;  // mean batch loss of the epoch (initial loss at epoch 0)
  double wall_time_s = 0.0;
};

struct TrainOptions {
  int epochs = 10;
  int batch_size = 0;          // 0: max(1, floor(0.02 * N_train))
  std::uint64_t max_steps = 0; // 0: no cap
  grad::NadamOptions nadam;
  int threads = 1;
  /// Stop once the epoch's train error falls to this value (0 disables).
  double target_train_eps = 0.0;
  std::function<void(const EpochMetrics&)> on_epoch;
};

struct TrainResult {
  Model model;
  std::vector<EpochMetrics> history;
  std::uint64_t steps = 0;
};

int default_batch_size(std::size_t n_train);

/// Mini-batch Nadam on the MSE of standardized targets. Epoch 0 records the
/// untrained model. Per-sample gradients are reduced in sample order, so the
/// result does not depend on the thread count.
TrainResult train_loop(const bcrnet::NetConfig& cfg, const apps::Dataset& data,
                       const TrainOptions& options, std::uint64_t seed);

/// Continues training an existing model (its standardization is kept).
TrainResult train_model(Model model, const apps::Dataset& data, const TrainOptions& options,
                        std::uint64_t seed);

struct RepeatSummary {
  std::vector<double> train_eps;
  std::vector<double> test_eps;
  double mean_train = 0.0;
  double mean_test = 0.0;
  double spread_test = 0.0;  // max - min
};

RepeatSummary summarize(const std::vector<TrainResult>& runs);

/// Gradient of the mean standardized MSE over `samples` (indices into data).
double batch_gradient(const Model& model, const std::vector<apps::TaskSample>& samples,
                      std::span<const std::size_t> indices, grad::Gradients& grads, int threads);

}  // namespace bcr::train
