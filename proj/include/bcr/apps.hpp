#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace bcr::apps {

enum class Task { Green1d, Green2d, Smoke };

std::string to_string(Task task);
Task parse_task(const std::string& s);

struct TaskSample {
  std::vector<double> input;
  std::vector<double> target;

  friend bool operator==(const TaskSample&, const TaskSample&) = default;
};

struct DatasetDescriptor {
  Task task = Task::Green1d;
  int dim = 1;
  int n = 64;       // fine grid side
  int coarse = 8;   // coarse grid side of the random field
  int n_train = 0;
  int n_test = 0;
  std::uint64_t seed = 0;

  friend bool operator==(const DatasetDescriptor&, const DatasetDescriptor&) = default;
};

struct Dataset {
  DatasetDescriptor descriptor;
  std::vector<TaskSample> train;
  std::vector<TaskSample> test;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// Trigonometric interpolation of periodic samples on an m (or m x m) grid
/// onto an n (or n x n) grid, with the Nyquist mode split evenly between
/// +m/2 and -m/2 so the result is real. Requires m <= n.
std::vector<double> fourier_interpolate(std::span<const double> coarse, int m, int n, int dim);

/// exp of the Fourier interpolation of the given coarse samples.
std::vector<double> field_from_coarse(std::span<const double> coarse, int m, int n, int dim);

/// Standard normal coarse samples for sample `index` of `stream`.
std::vector<double> coarse_normals(int m, int dim, std::uint64_t seed, std::uint64_t index,
                                   std::uint64_t stream);

/// Positive random field: i.i.d. N(0,1) on the coarse grid, interpolated,
/// then exponentiated.
std::vector<double> sample_field(int dim, int n, int m, std::uint64_t seed, std::uint64_t index = 0,
                                 std::uint64_t stream = 0);

/// Diagonal of (-Laplacian + diag(v))^-1 on the periodic unit interval or
/// square, with the three-point (1D) or five-point (2D) stencil scaled by
/// 1/h^2, h = 1/N. v must be positive; 1D N <= 1024, 2D N <= 32.
std::vector<double> green_diag_oracle(std::span<const double> v, int dim);

/// Fast non-physical sanity task: tanh of a fixed periodic smoothing of v.
std::vector<double> smoke_target(std::span<const double> v, int dim);

/// Inputs from sample_field (train stream 0, test stream 1) and targets
/// from the task's oracle. Samples are generated in index order, optionally
/// split over `threads` workers.
Dataset make_dataset(const DatasetDescriptor& descriptor, int threads = 1);

}  // namespace bcr::apps
