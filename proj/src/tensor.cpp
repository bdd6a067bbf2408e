#include "pnnet/tensor.hpp"

#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

namespace pnnet {

namespace {

void validate_extents(std::span<const std::size_t> extents) {
  if (extents.empty() || extents.size() > Shape::kMaxRank) {
    throw ShapeError("Shape", "rank must be 1..4, got " + std::to_string(extents.size()));
  }
  for (std::size_t axis = 0; axis < extents.size(); ++axis) {
    if (extents[axis] == 0) {
      throw ShapeError("Shape", "extent of axis " + std::to_string(axis) + " must be >= 1");
    }
  }
}

}  // namespace

Shape::Shape(std::initializer_list<std::size_t> extents)
    : Shape(std::span<const std::size_t>(extents.begin(), extents.size())) {}

Shape::Shape(std::span<const std::size_t> extents) {
  validate_extents(extents);
  std::copy(extents.begin(), extents.end(), extents_.begin());
  rank_ = extents.size();
}

std::size_t Shape::numel() const noexcept {
  if (rank_ == 0) return 0;
  return std::accumulate(extents_.begin(), extents_.begin() + rank_, std::size_t{1},
                         std::multiplies<>());
}

bool Shape::operator==(const Shape& other) const noexcept {
  return rank_ == other.rank_ &&
         std::equal(extents_.begin(), extents_.begin() + rank_, other.extents_.begin());
}

std::string Shape::str() const {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < rank_; ++i) {
    if (i) out << ',';
    out << extents_[i];
  }
  out << ']';
  return out.str();
}

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape, T fill) : shape_(shape), data_(shape.numel(), fill) {}

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape, std::vector<T> data) : shape_(shape), data_(std::move(data)) {
  if (data_.size() != shape_.numel()) {
    throw ShapeError("Tensor", "data length " + std::to_string(data_.size()) +
                                   " does not match shape " + shape_.str());
  }
}

template <typename T>
BasicTensor<T> BasicTensor<T>::reshaped(Shape shape) const {
  if (shape.numel() != data_.size()) {
    throw ShapeError("reshape", "cannot view " + shape_.str() + " as " + shape.str());
  }
  return BasicTensor(shape, data_);
}

template <typename T>
bool BasicTensor<T>::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
}

template <typename T>
BasicGradPair<T>::BasicGradPair(BasicTensor<T> v, BasicTensor<T> g) : value(std::move(v)), grad(std::move(g)) {
  if (!(value.shape() == grad.shape())) {
    throw ShapeError("GradPair", "value " + value.shape().str() + " vs grad " + grad.shape().str());
  }
}

void require_extent(const char* op, const char* axis, std::size_t expected, std::size_t actual) {
  if (expected != actual) throw ShapeError(op, axis, expected, actual);
}

void require_rank(const char* op, const Shape& shape, std::size_t rank) {
  if (shape.rank() != rank) {
    throw ShapeError(op, "expected rank " + std::to_string(rank) + ", got shape " + shape.str());
  }
}

template class BasicTensor<float>;
template class BasicTensor<double>;
template struct BasicGradPair<float>;
template struct BasicGradPair<double>;

}  // namespace pnnet
