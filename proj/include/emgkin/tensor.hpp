#pragma once

// Dense row-major tensor with the handful of operations the models need.
// BasicTensor<float> is the compute type; BasicTensor<double> is used for
// signal processing and for finite-difference verification.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "emgkin/error.hpp"

namespace emgkin {

using Shape = std::vector<std::size_t>;

inline std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) out << (i ? "x" : "") << shape[i];
  out << ']';
  return out.str();
}

inline std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

template <typename T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() = default;

  explicit BasicTensor(Shape shape, T fill = T{0})
      : shape_(std::move(shape)), data_(shape_size(shape_), fill) {
    check_shape();
  }

  BasicTensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
    check_shape();
    if (data_.size() != shape_size(shape_)) {
      throw DimensionError("tensor data has " + std::to_string(data_.size()) +
                           " elements but shape " + shape_string(shape_) + " needs " +
                           std::to_string(shape_size(shape_)));
    }
  }

  /// Rank-1 tensor from a list of values.
  static BasicTensor vector(std::initializer_list<T> values) {
    return BasicTensor({values.size()}, std::vector<T>(values));
  }

  /// Rank-2 tensor from nested row lists.
  static BasicTensor matrix(std::initializer_list<std::initializer_list<T>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r ? rows.begin()->size() : 0;
    std::vector<T> data;
    data.reserve(r * c);
    for (const auto& row : rows) {
      if (row.size() != c) throw DimensionError("ragged matrix literal");
      data.insert(data.end(), row.begin(), row.end());
    }
    return BasicTensor({r, c}, std::move(data));
  }

  template <typename U>
  BasicTensor<U> cast() const {
    std::vector<U> out(data_.begin(), data_.end());
    return BasicTensor<U>(shape_, std::move(out));
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }
  std::size_t dim(std::size_t axis) const {
    if (axis >= shape_.size()) {
      throw DimensionError("axis " + std::to_string(axis) + " out of range for shape " +
                           shape_string(shape_));
    }
    return shape_[axis];
  }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }
  std::vector<T>& storage() noexcept { return data_; }
  const std::vector<T>& storage() const noexcept { return data_; }

  T& operator[](std::size_t i) noexcept { return data_[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }

  T& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * shape_[1] + j]; }
  const T& operator()(std::size_t i, std::size_t j) const noexcept {
    return data_[i * shape_[1] + j];
  }
  T& operator()(std::size_t i, std::size_t j, std::size_t k) noexcept {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }
  const T& operator()(std::size_t i, std::size_t j, std::size_t k) const noexcept {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }

  /// Row `i` of the tensor viewed as [dim(0) x rest].
  std::span<T> row(std::size_t i) noexcept {
    const std::size_t stride = data_.size() / shape_[0];
    return std::span<T>(data_).subspan(i * stride, stride);
  }
  std::span<const T> row(std::size_t i) const noexcept {
    const std::size_t stride = data_.size() / shape_[0];
    return std::span<const T>(data_).subspan(i * stride, stride);
  }

  BasicTensor reshape(Shape shape) const {
    if (shape_size(shape) != data_.size()) {
      throw DimensionError("cannot reshape " + shape_string(shape_) + " to " +
                           shape_string(shape));
    }
    return BasicTensor(std::move(shape), data_);
  }

  void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
  }

  friend bool operator==(const BasicTensor& a, const BasicTensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  void check_shape() const {
    for (std::size_t d : shape_) {
      if (d == 0) throw DimensionError("tensor shape " + shape_string(shape_) + " has a zero extent");
    }
  }

  Shape shape_;
  std::vector<T> data_;
};

using Tensor = BasicTensor<float>;
using Tensor64 = BasicTensor<double>;

template <typename T>
BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul shape mismatch: " + shape_string(a.shape()) + " x " +
                         shape_string(b.shape()));
  }
  const std::size_t m = a.dim(0), n = a.dim(1), p = b.dim(1);
  BasicTensor<T> out({m, p});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t k = 0; k < n; ++k) {
      const T aik = a(i, k);
      for (std::size_t j = 0; j < p; ++j) out(i, j) += aik * b(k, j);
    }
  }
  return out;
}

enum class ElementOp { add, sub, mul, sigmoid, tanh };

template <typename T>
T sigmoid(T x) {
  return T{1} / (T{1} + std::exp(-x));
}

template <typename T>
BasicTensor<T> elementwise(ElementOp op, const BasicTensor<T>& a) {
  BasicTensor<T> out = a;
  switch (op) {
    case ElementOp::sigmoid:
      for (auto& v : out.data()) v = sigmoid(v);
      break;
    case ElementOp::tanh:
      for (auto& v : out.data()) v = std::tanh(v);
      break;
    default:
      throw UsageError("binary element op called with one operand");
  }
  return out;
}

template <typename T>
BasicTensor<T> elementwise(ElementOp op, const BasicTensor<T>& a, const BasicTensor<T>& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError("elementwise shape mismatch: " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
  BasicTensor<T> out = a;
  auto o = out.data();
  auto y = b.data();
  switch (op) {
    case ElementOp::add:
      for (std::size_t i = 0; i < o.size(); ++i) o[i] += y[i];
      break;
    case ElementOp::sub:
      for (std::size_t i = 0; i < o.size(); ++i) o[i] -= y[i];
      break;
    case ElementOp::mul:
      for (std::size_t i = 0; i < o.size(); ++i) o[i] *= y[i];
      break;
    default:
      throw UsageError("unary element op called with two operands");
  }
  return out;
}

namespace detail {
// Splits a shape around `axis` into (outer, extent, inner) strides.
inline void axis_split(const Shape& shape, std::size_t axis, std::size_t& outer,
                       std::size_t& inner) {
  outer = 1;
  inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) inner *= shape[i];
}
}  // namespace detail

/// Elements [begin, end) along `axis`.
template <typename T>
BasicTensor<T> slice(const BasicTensor<T>& a, std::size_t axis, std::size_t begin,
                     std::size_t end) {
  if (axis >= a.rank() || begin >= end || end > a.dim(axis)) {
    throw DimensionError("invalid slice [" + std::to_string(begin) + ", " + std::to_string(end) +
                         ") on axis " + std::to_string(axis) + " of " + shape_string(a.shape()));
  }
  std::size_t outer = 0, inner = 0;
  detail::axis_split(a.shape(), axis, outer, inner);
  Shape shape = a.shape();
  shape[axis] = end - begin;
  std::vector<T> out;
  out.reserve(shape_size(shape));
  const auto src = a.data();
  for (std::size_t o = 0; o < outer; ++o) {
    const auto first = src.begin() + static_cast<std::ptrdiff_t>((o * a.dim(axis) + begin) * inner);
    out.insert(out.end(), first, first + static_cast<std::ptrdiff_t>((end - begin) * inner));
  }
  return BasicTensor<T>(std::move(shape), std::move(out));
}

template <typename T>
BasicTensor<T> concat(const std::vector<BasicTensor<T>>& parts, std::size_t axis = 0) {
  if (parts.empty()) throw DimensionError("concat of zero tensors");
  const Shape& ref = parts.front().shape();
  if (axis >= ref.size()) throw DimensionError("concat axis out of range");
  Shape shape = ref;
  shape[axis] = 0;
  for (const auto& p : parts) {
    bool ok = p.rank() == ref.size();
    for (std::size_t i = 0; ok && i < ref.size(); ++i) ok = i == axis || p.dim(i) == ref[i];
    if (!ok) {
      throw DimensionError("concat shape mismatch: " + shape_string(ref) + " vs " +
                           shape_string(p.shape()));
    }
    shape[axis] += p.dim(axis);
  }
  std::size_t outer = 0, inner = 0;
  detail::axis_split(ref, axis, outer, inner);
  std::vector<T> out;
  out.reserve(shape_size(shape));
  for (std::size_t o = 0; o < outer; ++o) {
    for (const auto& p : parts) {
      const std::size_t chunk = p.dim(axis) * inner;
      const auto first = p.data().begin() + static_cast<std::ptrdiff_t>(o * chunk);
      out.insert(out.end(), first, first + static_cast<std::ptrdiff_t>(chunk));
    }
  }
  return BasicTensor<T>(std::move(shape), std::move(out));
}

}  // namespace emgkin
