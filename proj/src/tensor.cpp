#include "bcr/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "bcr/error.hpp"

namespace bcr {
namespace {

std::size_t product(const std::vector<int>& extents) {
  std::size_t n = 1;
  for (int e : extents) n *= static_cast<std::size_t>(e);
  return n;
}

void check_shape(const std::vector<int>& extents, int channels) {
  if (extents.empty() || extents.size() > 2) {
    throw ValidationError("tensor: expected 1 or 2 spatial axes, got " +
                          std::to_string(extents.size()));
  }
  for (int e : extents) {
    if (e <= 0) throw ValidationError("tensor: spatial extents must be positive");
  }
  if (channels <= 0) throw ValidationError("tensor: channel count must be positive");
}

}  // namespace

Tensor::Tensor(std::vector<int> extents, int channels, double fill)
    : extents_(std::move(extents)), channels_(channels) {
  check_shape(extents_, channels_);
  data_.assign(product(extents_) * channels_, fill);
}

Tensor::Tensor(std::vector<int> extents, int channels, std::vector<double> data)
    : extents_(std::move(extents)), channels_(channels), data_(std::move(data)) {
  check_shape(extents_, channels_);
  if (data_.size() != product(extents_) * channels_) {
    throw ValidationError("tensor: data length " + std::to_string(data_.size()) +
                          " does not match shape");
  }
}

std::size_t Tensor::positions() const { return product(extents_); }

Tensor field_tensor(std::span<const double> values, int dim) {
  if (dim == 1) {
    return Tensor({static_cast<int>(values.size())}, 1,
                  std::vector<double>(values.begin(), values.end()));
  }
  const auto n = static_cast<int>(std::lround(std::sqrt(static_cast<double>(values.size()))));
  if (static_cast<std::size_t>(n) * n != values.size()) {
    throw ValidationError("field_tensor: 2D field length is not a perfect square");
  }
  return Tensor({n, n}, 1, std::vector<double>(values.begin(), values.end()));
}

Tensor cyclic_shift(const Tensor& x, int shift) {
  Tensor out(x.extents(), x.channels());
  const int C = x.channels();
  auto wrap = [](int i, int n) { return ((i % n) + n) % n; };
  if (x.dim() == 1) {
    const int n = x.extent(0);
    for (int i = 0; i < n; ++i) {
      const int src = wrap(i - shift, n);
      for (int c = 0; c < C; ++c) out.at(i, c) = x.at(src, c);
    }
    return out;
  }
  const int n0 = x.extent(0);
  const int n1 = x.extent(1);
  for (int i = 0; i < n0; ++i) {
    for (int j = 0; j < n1; ++j) {
      const std::size_t src = static_cast<std::size_t>(wrap(i - shift, n0)) * n1 + wrap(j - shift, n1);
      const std::size_t dst = static_cast<std::size_t>(i) * n1 + j;
      for (int c = 0; c < C; ++c) out.at(dst, c) = x.at(src, c);
    }
  }
  return out;
}

Tensor slice_channels(const Tensor& x, int first, int count) {
  if (first < 0 || count <= 0 || first + count > x.channels()) {
    throw ValidationError("slice_channels: range out of bounds");
  }
  Tensor out(x.extents(), count);
  for (std::size_t pos = 0; pos < x.positions(); ++pos) {
    for (int c = 0; c < count; ++c) out.at(pos, c) = x.at(pos, first + c);
  }
  return out;
}

double l2_norm(std::span<const double> x) {
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return std::sqrt(acc);
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ValidationError("max_abs_diff: length mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace bcr
