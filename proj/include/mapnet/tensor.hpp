#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "mapnet/errors.hpp"

namespace mapnet {

enum class Precision { single, dbl };

// Dimensions of a 4-D tensor in batch/channel/height/width order.
struct Shape {
  int n = 1;
  int c = 1;
  int h = 1;
  int w = 1;

  [[nodiscard]] std::size_t numel() const {
    return static_cast<std::size_t>(n) * c * h * w;
  }
  [[nodiscard]] std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
  [[nodiscard]] std::string str() const;

  friend bool operator==(const Shape&, const Shape&) = default;
};

// Dense row-major 4-D array, w fastest. Every dimension is at least one.
template <typename T>
class Tensor {
  static_assert(std::is_floating_point_v<T>);

 public:
  using value_type = T;

  Tensor() : data_(1, T{0}) {}
  explicit Tensor(Shape shape, T fill = T{0}) : shape_(checked(shape)), data_(shape.numel(), fill) {}
  Tensor(Shape shape, std::vector<T> values) : shape_(checked(shape)), data_(std::move(values)) {
    if (data_.size() != shape_.numel()) {
      throw ShapeError("tensor of shape " + shape_.str() + " given " + std::to_string(data_.size()) +
                       " elements");
    }
  }

  [[nodiscard]] const Shape& shape() const { return shape_; }
  [[nodiscard]] int n() const { return shape_.n; }
  [[nodiscard]] int c() const { return shape_.c; }
  [[nodiscard]] int h() const { return shape_.h; }
  [[nodiscard]] int w() const { return shape_.w; }
  [[nodiscard]] std::size_t size() const { return data_.size(); }

  [[nodiscard]] std::span<T> data() { return data_; }
  [[nodiscard]] std::span<const T> data() const { return data_; }
  [[nodiscard]] const std::vector<T>& values() const { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  [[nodiscard]] std::size_t index(int n, int c, int y, int x) const {
    return ((static_cast<std::size_t>(n) * shape_.c + c) * shape_.h + y) * shape_.w + x;
  }
  T& operator()(int n, int c, int y, int x) { return data_[index(n, c, y, x)]; }
  const T& operator()(int n, int c, int y, int x) const { return data_[index(n, c, y, x)]; }

  // Pointer to the h*w plane of (n, c).
  T* plane(int n, int c) { return data_.data() + index(n, c, 0, 0); }
  const T* plane(int n, int c) const { return data_.data() + index(n, c, 0, 0); }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  // Same elements under new dims of equal element count.
  [[nodiscard]] Tensor reshaped(Shape shape) const { return Tensor(shape, data_); }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  static Shape checked(Shape s) {
    if (s.n < 1 || s.c < 1 || s.h < 1 || s.w < 1) {
      throw ShapeError("tensor dims must be >= 1, got " + s.str());
    }
    return s;
  }

  Shape shape_;
  std::vector<T> data_;
};

template <typename To, typename From>
Tensor<To> tensor_cast(const Tensor<From>& t) {
  if constexpr (std::is_same_v<To, From>) {
    return t;
  } else {
    std::vector<To> out(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) out[i] = static_cast<To>(t[i]);
    return Tensor<To>(t.shape(), std::move(out));
  }
}

// True iff every element is finite.
template <typename T>
bool all_finite(const Tensor<T>& t);

// Bitwise comparison of the element payloads (distinguishes -0 and NaN payloads).
template <typename T>
bool bitwise_equal(const Tensor<T>& a, const Tensor<T>& b);

}  // namespace mapnet
