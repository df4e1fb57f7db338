#pragma once

#include <Eigen/Core>
#include <Eigen/StdVector>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "ego/common.hpp"
#include "ego/rng.hpp"

namespace ego {

template <typename S>
using ArrayMap = Eigen::Map<Eigen::Array<S, Eigen::Dynamic, 1>>;
template <typename S>
using ConstArrayMap = Eigen::Map<const Eigen::Array<S, Eigen::Dynamic, 1>>;
template <typename S>
using MatrixMap = Eigen::Map<Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <typename S>
using ConstMatrixMap =
    Eigen::Map<const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

// Dense n-dimensional array, row-major, value semantics. The scalar is a
// template parameter: float for training, double for gradient checking.
// Storage is SIMD-aligned so reduction results do not depend on where the
// allocator happened to place the buffer.
template <typename S>
class Tensor {
 public:
  using Storage = std::vector<S, Eigen::aligned_allocator<S>>;

  Tensor() = default;

  explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
    validate_shape();
    data_.assign(static_cast<std::size_t>(numel_from(shape_)), S(0));
  }

  Tensor(std::vector<int> shape, std::vector<S> data) : shape_(std::move(shape)) {
    validate_shape();
    if (static_cast<std::int64_t>(data.size()) != numel_from(shape_))
      throw DimensionError("tensor data length does not match shape");
    data_.assign(data.begin(), data.end());
  }

  static Tensor full(std::vector<int> shape, S value) {
    Tensor t(std::move(shape));
    t.flat().setConstant(value);
    return t;
  }

  static Tensor scalar(S value) { return full({1}, value); }

  static Tensor uniform(std::vector<int> shape, Rng& rng, S lo, S hi) {
    Tensor t(std::move(shape));
    for (auto& v : t.data_) v = static_cast<S>(rng.uniform(lo, hi));
    return t;
  }

  static Tensor gaussian(std::vector<int> shape, Rng& rng, S sigma = S(1)) {
    Tensor t(std::move(shape));
    for (auto& v : t.data_) v = static_cast<S>(rng.gaussian() * sigma);
    return t;
  }

  const std::vector<int>& shape() const { return shape_; }
  int dim(int i) const { return shape_.at(static_cast<std::size_t>(i)); }
  int rank() const { return static_cast<int>(shape_.size()); }
  std::int64_t numel() const { return static_cast<std::int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  S* data() { return data_.data(); }
  const S* data() const { return data_.data(); }
  S& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
  const S& operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

  ArrayMap<S> flat() { return ArrayMap<S>(data_.data(), numel()); }
  ConstArrayMap<S> flat() const { return ConstArrayMap<S>(data_.data(), numel()); }

  // 2-D row-major view; rows*cols must cover the whole tensor.
  MatrixMap<S> mat(int rows, int cols) {
    if (static_cast<std::int64_t>(rows) * cols != numel())
      throw DimensionError("matrix view does not cover tensor");
    return MatrixMap<S>(data_.data(), rows, cols);
  }
  ConstMatrixMap<S> mat(int rows, int cols) const {
    if (static_cast<std::int64_t>(rows) * cols != numel())
      throw DimensionError("matrix view does not cover tensor");
    return ConstMatrixMap<S>(data_.data(), rows, cols);
  }

  bool all_finite() const { return data_.empty() || flat().isFinite().all(); }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  Tensor reshaped(std::vector<int> shape) const {
    if (numel_from(shape) != numel()) throw DimensionError("reshape changes element count");
    Tensor t = *this;
    t.shape_ = std::move(shape);
    return t;
  }

  template <typename T>
  Tensor<T> cast() const {
    Tensor<T> out(shape_);
    for (std::int64_t i = 0; i < numel(); ++i) out[i] = static_cast<T>(data_[static_cast<std::size_t>(i)]);
    return out;
  }

  static std::string shape_str(const std::vector<int>& s) {
    std::ostringstream os;
    os << "(";
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << ")";
    return os.str();
  }

  bool requires_grad = false;  // default grad intent when used as a tape leaf

 private:
  static std::int64_t numel_from(const std::vector<int>& shape) {
    std::int64_t n = 1;
    for (int d : shape) n *= d;
    return shape.empty() ? 0 : n;
  }

  void validate_shape() const {
    if (shape_.empty()) throw DimensionError("tensor shape must have at least one dim");
    for (int d : shape_)
      if (d <= 0) throw DimensionError("tensor dims must be positive, got " + shape_str(shape_));
  }

  std::vector<int> shape_;
  Storage data_;
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

}  // namespace ego
