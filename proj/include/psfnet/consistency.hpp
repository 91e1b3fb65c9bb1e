#pragma once

#include <limits>

#include "psfnet/tensor.hpp"

namespace psfnet {

inline constexpr double kStrictDc = std::numeric_limits<double>::infinity();

// Data-consistency projection. Acquired k-space entries (dc_mask == 1) of
// fft2c(x) become (Fx + lambda*y) / (1 + lambda); lambda = inf replaces them
// with y. Unacquired entries are left untouched.
ComplexTensor dc_project(const ComplexTensor& x, const ComplexTensor& und_ksp,
                         const MaskTensor& dc_mask, double lambda = kStrictDc);

// Linear part of dc_project, which is self-adjoint: ifft2c(Lambda * fft2c(g))
// where Lambda is 1/(1+lambda) on acquired entries and 1 elsewhere.
ComplexTensor dc_linear_part(const ComplexTensor& g, const MaskTensor& dc_mask, double lambda);

}  // namespace psfnet
