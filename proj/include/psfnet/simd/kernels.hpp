#pragma once

// Inner-loop kernels shared by the convolution layers and the k-space
// interpolation operator. Each kernel has a portable scalar reference and an
// AVX2/FMA variant; the active table is chosen once at startup from the CPU
// features and can be forced with PSFNET_SIMD=scalar|avx2 or select_kernels().

#include <complex>
#include <cstddef>
#include <string_view>

namespace psfnet::simd {

struct KernelTable {
  const char* name;

  // out[y*w + x] += sum_{dy,dx<3} w9[dy*3+dx] * in_pad[(y+dy)*(w+2) + x+dx]
  // `in_pad` is an (h+2)x(w+2) zero-bordered plane.
  void (*conv3x3_accumulate)(const double* in_pad, std::size_t h, std::size_t w, const double* w9,
                             double* out);

  // dw9[dy*3+dx] += sum_{y,x} gout[y*w + x] * in_pad[(y+dy)*(w+2) + x+dx]
  void (*conv3x3_weight_grad)(const double* in_pad, const double* gout, std::size_t h,
                              std::size_t w, double* dw9);

  // y[i] += a * x[i]
  void (*complex_axpy)(std::complex<double> a, const std::complex<double>* x,
                       std::complex<double>* y, std::size_t n);

  // sum_i a[i] * b[i]
  double (*dot)(const double* a, const double* b, std::size_t n);
};

const KernelTable& scalar_kernels();

// Null when the build or the CPU lacks AVX2+FMA.
const KernelTable* avx2_kernels();

// Table in use by the library.
const KernelTable& active_kernels();

// Force a table by name ("scalar", "avx2", "auto"). Returns false if the
// requested variant is unavailable; the active table is then left unchanged.
bool select_kernels(std::string_view name);

}  // namespace psfnet::simd
