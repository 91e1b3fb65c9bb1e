#pragma once

#include <memory>
#include <span>
#include <vector>

#include "psfnet/tensor.hpp"

namespace psfnet {

enum class FftDirection { kForward, kInverse };

// Centered, unitary 2-D DFT over the last two axes. The zero frequency sits at
// (floor(h/2), floor(w/2)) and both directions scale by 1/sqrt(h*w), so the
// transform is an isometry and the inverse is its adjoint.
class FftPlan {
 public:
  FftPlan(std::size_t height, std::size_t width, FftDirection direction);

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  FftDirection direction() const noexcept { return direction_; }

  // Transforms one h*w plane in place.
  void execute(std::span<cplx> plane) const;

  class Line;

 private:
  std::size_t height_;
  std::size_t width_;
  FftDirection direction_;
  std::shared_ptr<const Line> rows_;
  std::shared_ptr<const Line> cols_;
};

// Both accept [h,w] or [c,h,w]; the transform is applied per leading slice.
ComplexTensor fft2c(const ComplexTensor& img);
ComplexTensor ifft2c(const ComplexTensor& ksp);

void fft2c_inplace(ComplexTensor& x);
void ifft2c_inplace(ComplexTensor& x);

double norm1(std::span<const cplx> x);
double norm2(std::span<const cplx> x);
inline double norm1(const ComplexTensor& x) { return norm1(x.span()); }
inline double norm2(const ComplexTensor& x) { return norm2(x.span()); }

}  // namespace psfnet
