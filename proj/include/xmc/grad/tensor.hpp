#pragma once

#include <xmc/error.hpp>

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <sstream>
#include <string>
#include <vector>

namespace xmc::grad {

using Shape = std::array<std::size_t, 4>;

inline std::size_t shape_size(const Shape& s) { return s[0] * s[1] * s[2] * s[3]; }

inline std::string shape_string(const Shape& s) {
  std::ostringstream os;
  os << '(' << s[0] << 'x' << s[1] << 'x' << s[2] << 'x' << s[3] << ')';
  return os.str();
}

// Dense (batch, channels, height, width) array, width fastest-varying.
// Matrices are stored as (rows, cols, 1, 1) and vectors as (n, 1, 1, 1).
template <class T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T(0)) : shape_(shape), data_(shape_size(shape), fill) {}
  Tensor(Shape shape, std::vector<T> data) : shape_(shape), data_(std::move(data)) {
    if (data_.size() != shape_size(shape_))
      throw ShapeError("tensor data length " + std::to_string(data_.size()) + " does not match shape " +
                       shape_string(shape_));
  }

  static Tensor matrix(std::size_t rows, std::size_t cols, T fill = T(0)) { return Tensor({rows, cols, 1, 1}, fill); }
  static Tensor vector(std::size_t n, T fill = T(0)) { return Tensor({n, 1, 1, 1}, fill); }
  static Tensor scalar(T v) { return Tensor({1, 1, 1, 1}, v); }

  const Shape& shape() const { return shape_; }
  std::size_t dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }
  T* ptr() { return data_.data(); }
  const T* ptr() const { return data_.data(); }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::size_t offset(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
    return ((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w;
  }
  T& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) { return data_[offset(n, c, h, w)]; }
  const T& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
    return data_[offset(n, c, h, w)];
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  bool all_finite() const {
    for (const T& v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  // contiguous copy of samples [first, first + count)
  Tensor slice_batch(std::size_t first, std::size_t count) const {
    const std::size_t per = shape_[1] * shape_[2] * shape_[3];
    if (first + count > shape_[0]) throw ShapeError("batch slice out of range for " + shape_string(shape_));
    Tensor out({count, shape_[1], shape_[2], shape_[3]});
    std::copy(data_.begin() + static_cast<std::ptrdiff_t>(first * per),
              data_.begin() + static_cast<std::ptrdiff_t>((first + count) * per), out.data_.begin());
    return out;
  }

  template <class U>
  Tensor<U> cast() const {
    Tensor<U> out(shape_);
    for (std::size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<U>(data_[i]);
    return out;
  }

  friend bool operator==(const Tensor& a, const Tensor& b) { return a.shape_ == b.shape_ && a.data_ == b.data_; }

 private:
  Shape shape_{0, 0, 0, 0};
  std::vector<T> data_;
};

// Trainable tensor with its gradient accumulator.
template <class T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;

  Parameter() = default;
  Parameter(std::string n, Tensor<T> v) : name(std::move(n)), value(std::move(v)), grad(value.shape()) {}

  void zero_grad() { grad = Tensor<T>(value.shape()); }
};

}  // namespace xmc::grad
