#include "psfnet/simd/kernels.hpp"

namespace psfnet::simd {
namespace {

void conv3x3_accumulate_scalar(const double* in_pad, std::size_t h, std::size_t w,
                               const double* w9, double* out) {
  const std::size_t stride = w + 2;
  for (std::size_t y = 0; y < h; ++y) {
    double* orow = out + y * w;
    for (std::size_t dy = 0; dy < 3; ++dy) {
      const double* irow = in_pad + (y + dy) * stride;
      for (std::size_t dx = 0; dx < 3; ++dx) {
        const double k = w9[dy * 3 + dx];
        const double* src = irow + dx;
        for (std::size_t x = 0; x < w; ++x) orow[x] += k * src[x];
      }
    }
  }
}

void conv3x3_weight_grad_scalar(const double* in_pad, const double* gout, std::size_t h,
                                std::size_t w, double* dw9) {
  const std::size_t stride = w + 2;
  for (std::size_t dy = 0; dy < 3; ++dy) {
    for (std::size_t dx = 0; dx < 3; ++dx) {
      double acc = 0.0;
      for (std::size_t y = 0; y < h; ++y) {
        const double* src = in_pad + (y + dy) * stride + dx;
        const double* g = gout + y * w;
        for (std::size_t x = 0; x < w; ++x) acc += g[x] * src[x];
      }
      dw9[dy * 3 + dx] += acc;
    }
  }
}

void complex_axpy_scalar(std::complex<double> a, const std::complex<double>* x,
                         std::complex<double>* y, std::size_t n) {
  const double ar = a.real();
  const double ai = a.imag();
  for (std::size_t i = 0; i < n; ++i) {
    const double xr = x[i].real();
    const double xi = x[i].imag();
    y[i] = {y[i].real() + (ar * xr - ai * xi), y[i].imag() + (ar * xi + ai * xr)};
  }
}

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

}  // namespace

const KernelTable& scalar_kernels() {
  static const KernelTable table{
      "scalar", conv3x3_accumulate_scalar, conv3x3_weight_grad_scalar, complex_axpy_scalar,
      dot_scalar};
  return table;
}

}  // namespace psfnet::simd
