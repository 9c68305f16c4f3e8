#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace bcr {

/// Dense field over a 1D or 2D periodic grid with a channel axis.
/// Storage is row-major over the spatial axes with the channel index
/// varying fastest.
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::vector<int> extents, int channels, double fill = 0.0);
  Tensor(std::vector<int> extents, int channels, std::vector<double> data);

  int dim() const { return static_cast<int>(extents_.size()); }
  const std::vector<int>& extents() const { return extents_; }
  int extent(int axis) const { return extents_.at(axis); }
  int channels() const { return channels_; }
  std::size_t positions() const;
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  const std::vector<double>& values() const { return data_; }

  double& at(std::size_t pos, int c) { return data_[pos * channels_ + c]; }
  double at(std::size_t pos, int c) const { return data_[pos * channels_ + c]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  bool same_shape(const Tensor& other) const {
    return extents_ == other.extents_ && channels_ == other.channels_;
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::vector<int> extents_;
  int channels_ = 0;
  std::vector<double> data_;
};

/// Single-channel tensor holding a 1D field, or a 2D field given as row-major n x n.
Tensor field_tensor(std::span<const double> values, int dim);

/// Cyclic shift along every spatial axis by `shift` positions: out[i] = in[i - shift].
Tensor cyclic_shift(const Tensor& x, int shift);

/// Channels [first, first + count).
Tensor slice_channels(const Tensor& x, int first, int count);

double l2_norm(std::span<const double> x);
double max_abs_diff(std::span<const double> a, std::span<const double> b);

}  // namespace bcr
