#pragma once

#include <algorithm>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "psfnet/errors.hpp"

namespace psfnet {

using cplx = std::complex<double>;
using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_to_string(const Shape& shape);

// Dense row-major N-D array. Extents are outermost-first.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape) : shape_(std::move(shape)), data_(shape_numel(shape_)) {}
  Tensor(Shape shape, T fill) : shape_(std::move(shape)), data_(shape_numel(shape_), fill) {}
  Tensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != shape_numel(shape_)) {
      throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                       " does not match shape " + shape_to_string(shape_));
    }
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t ndim() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T* data() noexcept { return data_.data(); }
  const T* data() const noexcept { return data_.data(); }
  std::span<T> span() noexcept { return data_; }
  std::span<const T> span() const noexcept { return data_; }
  std::vector<T>& storage() noexcept { return data_; }
  const std::vector<T>& storage() const noexcept { return data_; }

  T& operator[](std::size_t i) noexcept { return data_[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }

  // 2-D and 3-D accessors for the [h,w] and [c,h,w] layouts used everywhere.
  T& at(std::size_t y, std::size_t x) { return data_[y * shape_[1] + x]; }
  const T& at(std::size_t y, std::size_t x) const { return data_[y * shape_[1] + x]; }
  T& at(std::size_t c, std::size_t y, std::size_t x) {
    return data_[(c * shape_[1] + y) * shape_[2] + x];
  }
  const T& at(std::size_t c, std::size_t y, std::size_t x) const {
    return data_[(c * shape_[1] + y) * shape_[2] + x];
  }

  // View of one outermost slice, e.g. one coil of a [c,h,w] tensor.
  std::span<T> slice(std::size_t outer) {
    const std::size_t inner = data_.size() / shape_.at(0);
    return std::span<T>(data_).subspan(outer * inner, inner);
  }
  std::span<const T> slice(std::size_t outer) const {
    const std::size_t inner = data_.size() / shape_.at(0);
    return std::span<const T>(data_).subspan(outer * inner, inner);
  }

  void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

  bool operator==(const Tensor& other) const = default;

 private:
  Shape shape_;
  std::vector<T> data_;
};

using ComplexTensor = Tensor<cplx>;
using RealTensor = Tensor<double>;
using MaskTensor = Tensor<std::uint8_t>;

void require_same_shape(const Shape& a, const Shape& b, const char* what);

template <typename A, typename B>
void require_same_shape(const Tensor<A>& a, const Tensor<B>& b, const char* what) {
  require_same_shape(a.shape(), b.shape(), what);
}

// Elementwise helpers on complex tensors.
ComplexTensor operator+(const ComplexTensor& a, const ComplexTensor& b);
ComplexTensor operator-(const ComplexTensor& a, const ComplexTensor& b);
ComplexTensor operator*(cplx s, const ComplexTensor& a);

// a*x + b*z
ComplexTensor lincomb(cplx a, const ComplexTensor& x, cplx b, const ComplexTensor& z);

RealTensor magnitude(const ComplexTensor& x);
ComplexTensor to_complex(const RealTensor& x);

// Real inner product <a, b> = Re(sum conj(a) b).
double real_inner(const ComplexTensor& a, const ComplexTensor& b);

bool all_finite(const ComplexTensor& x);
bool all_finite(const RealTensor& x);

}  // namespace psfnet
