#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

#include "wait/common.hpp"

namespace wait {

// Dense row-major tensor of doubles. Rank ≤ 4 in practice (N,C,H,W for
// activations, Cout,Cin,K,K for conv weights). All numerics in this project
// run in double precision; see README for the rationale.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
    data_.assign(static_cast<std::size_t>(compute_numel(shape_)), 0.0);
  }
  Tensor(std::vector<int> shape, double fill) : shape_(std::move(shape)) {
    data_.assign(static_cast<std::size_t>(compute_numel(shape_)), fill);
  }
  Tensor(std::vector<int> shape, std::vector<double> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (static_cast<std::int64_t>(data_.size()) != compute_numel(shape_))
      throw ShapeError("Tensor: data size does not match shape");
  }

  static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }
  static Tensor full(std::vector<int> shape, double v) { return Tensor(std::move(shape), v); }
  static Tensor zeros_like(const Tensor& t) { return Tensor(t.shape()); }

  bool defined() const { return !shape_.empty(); }
  int rank() const { return static_cast<int>(shape_.size()); }
  const std::vector<int>& shape() const { return shape_; }
  int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
  std::int64_t numel() const { return static_cast<std::int64_t>(data_.size()); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& storage() { return data_; }
  const std::vector<double>& storage() const { return data_; }

  double& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
  double operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

  // Unchecked multi-dim accessors, hot paths index raw data() directly.
  double& at(int a, int b) { return data_[static_cast<std::size_t>(a) * shape_[1] + b]; }
  double at(int a, int b) const { return data_[static_cast<std::size_t>(a) * shape_[1] + b]; }
  double& at(int a, int b, int c) {
    return data_[(static_cast<std::size_t>(a) * shape_[1] + b) * shape_[2] + c];
  }
  double at(int a, int b, int c) const {
    return data_[(static_cast<std::size_t>(a) * shape_[1] + b) * shape_[2] + c];
  }
  double& at(int a, int b, int c, int d) {
    return data_[((static_cast<std::size_t>(a) * shape_[1] + b) * shape_[2] + c) * shape_[3] + d];
  }
  double at(int a, int b, int c, int d) const {
    return data_[((static_cast<std::size_t>(a) * shape_[1] + b) * shape_[2] + c) * shape_[3] + d];
  }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  void fill(double v) { data_.assign(data_.size(), v); }

  // Elementwise in-place accumulate; shapes must match.
  void add_(const Tensor& o) {
    if (!same_shape(o)) throw ShapeError("Tensor::add_: shape mismatch");
    const double* src = o.data();
    double* dst = data();
    const std::int64_t n = numel();
    for (std::int64_t i = 0; i < n; ++i) dst[i] += src[i];
  }

  void scale_(double s) {
    for (auto& v : data_) v *= s;
  }

  bool all_finite() const;
  double max_abs() const;
  double max_abs_diff(const Tensor& o) const;

  static std::string shape_str(const std::vector<int>& shape);
  std::string shape_str() const { return shape_str(shape_); }

 private:
  static std::int64_t compute_numel(const std::vector<int>& shape) {
    if (shape.empty()) return 0;
    std::int64_t n = 1;
    for (int d : shape) {
      if (d < 0) throw ShapeError("Tensor: negative dimension");
      n *= d;
    }
    return n;
  }

  std::vector<int> shape_;
  std::vector<double> data_;
};

}  // namespace wait
