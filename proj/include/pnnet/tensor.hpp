#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "pnnet/error.hpp"

namespace pnnet {

/// Extents of a rank 1..4 tensor. Lower ranks drop leading axes, so a rank-2
/// tensor is (batch, features) and a rank-4 tensor is (batch, channels, rows, cols).
class Shape {
 public:
  static constexpr std::size_t kMaxRank = 4;

  Shape() = default;
  Shape(std::initializer_list<std::size_t> extents);
  explicit Shape(std::span<const std::size_t> extents);

  std::size_t rank() const noexcept { return rank_; }
  std::size_t operator[](std::size_t axis) const { return extents_.at(axis); }
  std::size_t numel() const noexcept;
  std::span<const std::size_t> extents() const noexcept { return {extents_.data(), rank_}; }

  bool operator==(const Shape& other) const noexcept;

  std::string str() const;

 private:
  std::array<std::size_t, kMaxRank> extents_{};
  std::size_t rank_ = 0;
};

/// Dense row-major array. The single numeric currency of all layers.
template <typename T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() = default;
  explicit BasicTensor(Shape shape, T fill = T{0});
  BasicTensor(Shape shape, std::vector<T> data);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t size() const noexcept { return data_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_[axis]; }
  std::size_t rank() const noexcept { return shape_.rank(); }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }
  T* raw() noexcept { return data_.data(); }
  const T* raw() const noexcept { return data_.data(); }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  // Rank-specific indexed access; callers are expected to match the rank.
  T& at(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
  const T& at(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }
  T& at(std::size_t c, std::size_t y, std::size_t x) { return data_[(c * shape_[1] + y) * shape_[2] + x]; }
  const T& at(std::size_t c, std::size_t y, std::size_t x) const { return data_[(c * shape_[1] + y) * shape_[2] + x]; }
  T& at(std::size_t b, std::size_t c, std::size_t y, std::size_t x) { return data_[offset(b, c, y, x)]; }
  const T& at(std::size_t b, std::size_t c, std::size_t y, std::size_t x) const {
    return data_[offset(b, c, y, x)];
  }

  void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

  /// Same data viewed under a new shape of equal element count.
  BasicTensor reshaped(Shape shape) const;

  template <typename U>
  BasicTensor<U> cast() const {
    std::vector<U> out(data_.begin(), data_.end());
    return BasicTensor<U>(shape_, std::move(out));
  }

  bool all_finite() const noexcept;

  bool operator==(const BasicTensor& other) const noexcept {
    return shape_ == other.shape_ && data_ == other.data_;
  }

 private:
  std::size_t offset(std::size_t b, std::size_t c, std::size_t y, std::size_t x) const {
    return ((b * shape_[1] + c) * shape_[2] + y) * shape_[3] + x;
  }

  Shape shape_;
  std::vector<T> data_;
};

using Tensor = BasicTensor<float>;
using TensorD = BasicTensor<double>;

/// A value together with its accumulated cotangent.
template <typename T>
struct BasicGradPair {
  BasicTensor<T> value;
  BasicTensor<T> grad;

  explicit BasicGradPair(BasicTensor<T> v) : value(std::move(v)), grad(value.shape()) {}
  BasicGradPair(BasicTensor<T> v, BasicTensor<T> g);
};

using GradPair = BasicGradPair<float>;

/// Throws ShapeError naming `axis` when `actual != expected`.
void require_extent(const char* op, const char* axis, std::size_t expected, std::size_t actual);
void require_rank(const char* op, const Shape& shape, std::size_t rank);

extern template class BasicTensor<float>;
extern template class BasicTensor<double>;
extern template struct BasicGradPair<float>;
extern template struct BasicGradPair<double>;

}  // namespace pnnet
