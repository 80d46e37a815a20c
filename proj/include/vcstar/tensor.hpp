#pragma once

#include <algorithm>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <vector>

#include "vcstar/common.hpp"

namespace vcstar {

// Dense row-major (C-order) double tensor. All model math runs at 64-bit so
// finite-difference checks and bitwise trajectory determinism hold.
class tensor {
 public:
  tensor() = default;

  explicit tensor(std::vector<std::size_t> shape)
      : shape_(std::move(shape)), data_(numel_of(shape_), 0.0) {}

  tensor(std::vector<std::size_t> shape, std::vector<double> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != numel_of(shape_))
      throw data_error("tensor: data size does not match shape");
  }

  static tensor zeros(std::vector<std::size_t> shape) { return tensor(std::move(shape)); }

  static tensor full(std::vector<std::size_t> shape, double v) {
    tensor t(std::move(shape));
    std::fill(t.data_.begin(), t.data_.end(), v);
    return t;
  }

  static tensor scalar(double v) { return tensor({1}, {v}); }

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_[i]; }
  std::size_t numel() const { return data_.size(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  // Up-to-4D index accessors; bounds are the caller's problem in hot loops.
  double& at(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
  double at(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }

  double& at(std::size_t b, std::size_t c, std::size_t h, std::size_t w) {
    return data_[((b * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
  }
  double at(std::size_t b, std::size_t c, std::size_t h, std::size_t w) const {
    return data_[((b * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
  }

  bool same_shape(const tensor& o) const { return shape_ == o.shape_; }

  tensor reshaped(std::vector<std::size_t> new_shape) const {
    if (numel_of(new_shape) != numel())
      throw data_error("tensor: reshape changes element count");
    return tensor(std::move(new_shape), data_);
  }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(),
                       [](double v) { return is_finite(v); });
  }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  static std::size_t numel_of(const std::vector<std::size_t>& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                           std::multiplies<>());
  }

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

}  // namespace vcstar
