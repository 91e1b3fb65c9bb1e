// Compiled with -mavx2 -mfma; only reached after a runtime CPU check.

#include <immintrin.h>

#include "psfnet/simd/kernels.hpp"

namespace psfnet::simd {
namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

void conv3x3_accumulate_avx2(const double* in_pad, std::size_t h, std::size_t w,
                             const double* w9, double* out) {
  const std::size_t stride = w + 2;
  __m256d k[9];
  for (int t = 0; t < 9; ++t) k[t] = _mm256_broadcast_sd(w9 + t);

  for (std::size_t y = 0; y < h; ++y) {
    double* orow = out + y * w;
    const double* r0 = in_pad + y * stride;
    const double* r1 = r0 + stride;
    const double* r2 = r1 + stride;
    std::size_t x = 0;
    for (; x + 8 <= w; x += 8) {
      __m256d a = _mm256_loadu_pd(orow + x);
      __m256d b = _mm256_loadu_pd(orow + x + 4);
      a = _mm256_fmadd_pd(k[0], _mm256_loadu_pd(r0 + x), a);
      b = _mm256_fmadd_pd(k[0], _mm256_loadu_pd(r0 + x + 4), b);
      a = _mm256_fmadd_pd(k[1], _mm256_loadu_pd(r0 + x + 1), a);
      b = _mm256_fmadd_pd(k[1], _mm256_loadu_pd(r0 + x + 5), b);
      a = _mm256_fmadd_pd(k[2], _mm256_loadu_pd(r0 + x + 2), a);
      b = _mm256_fmadd_pd(k[2], _mm256_loadu_pd(r0 + x + 6), b);
      a = _mm256_fmadd_pd(k[3], _mm256_loadu_pd(r1 + x), a);
      b = _mm256_fmadd_pd(k[3], _mm256_loadu_pd(r1 + x + 4), b);
      a = _mm256_fmadd_pd(k[4], _mm256_loadu_pd(r1 + x + 1), a);
      b = _mm256_fmadd_pd(k[4], _mm256_loadu_pd(r1 + x + 5), b);
      a = _mm256_fmadd_pd(k[5], _mm256_loadu_pd(r1 + x + 2), a);
      b = _mm256_fmadd_pd(k[5], _mm256_loadu_pd(r1 + x + 6), b);
      a = _mm256_fmadd_pd(k[6], _mm256_loadu_pd(r2 + x), a);
      b = _mm256_fmadd_pd(k[6], _mm256_loadu_pd(r2 + x + 4), b);
      a = _mm256_fmadd_pd(k[7], _mm256_loadu_pd(r2 + x + 1), a);
      b = _mm256_fmadd_pd(k[7], _mm256_loadu_pd(r2 + x + 5), b);
      a = _mm256_fmadd_pd(k[8], _mm256_loadu_pd(r2 + x + 2), a);
      b = _mm256_fmadd_pd(k[8], _mm256_loadu_pd(r2 + x + 6), b);
      _mm256_storeu_pd(orow + x, a);
      _mm256_storeu_pd(orow + x + 4, b);
    }
    for (; x < w; ++x) {
      double acc = orow[x];
      acc += w9[0] * r0[x] + w9[1] * r0[x + 1] + w9[2] * r0[x + 2];
      acc += w9[3] * r1[x] + w9[4] * r1[x + 1] + w9[5] * r1[x + 2];
      acc += w9[6] * r2[x] + w9[7] * r2[x + 1] + w9[8] * r2[x + 2];
      orow[x] = acc;
    }
  }
}

void conv3x3_weight_grad_avx2(const double* in_pad, const double* gout, std::size_t h,
                              std::size_t w, double* dw9) {
  const std::size_t stride = w + 2;
  __m256d acc[9];
  for (auto& a : acc) a = _mm256_setzero_pd();
  double tail[9] = {};

  for (std::size_t y = 0; y < h; ++y) {
    const double* g = gout + y * w;
    const double* r[3] = {in_pad + y * stride, in_pad + (y + 1) * stride,
                          in_pad + (y + 2) * stride};
    std::size_t x = 0;
    for (; x + 4 <= w; x += 4) {
      const __m256d gv = _mm256_loadu_pd(g + x);
      for (int dy = 0; dy < 3; ++dy) {
        acc[dy * 3 + 0] = _mm256_fmadd_pd(gv, _mm256_loadu_pd(r[dy] + x), acc[dy * 3 + 0]);
        acc[dy * 3 + 1] = _mm256_fmadd_pd(gv, _mm256_loadu_pd(r[dy] + x + 1), acc[dy * 3 + 1]);
        acc[dy * 3 + 2] = _mm256_fmadd_pd(gv, _mm256_loadu_pd(r[dy] + x + 2), acc[dy * 3 + 2]);
      }
    }
    for (; x < w; ++x) {
      for (int dy = 0; dy < 3; ++dy) {
        for (int dx = 0; dx < 3; ++dx) tail[dy * 3 + dx] += g[x] * r[dy][x + dx];
      }
    }
  }
  for (int t = 0; t < 9; ++t) dw9[t] += hsum(acc[t]) + tail[t];
}

void complex_axpy_avx2(std::complex<double> a, const std::complex<double>* x,
                       std::complex<double>* y, std::size_t n) {
  const __m256d ar = _mm256_set1_pd(a.real());
  const __m256d ai = _mm256_set1_pd(a.imag());
  auto* xd = reinterpret_cast<const double*>(x);
  auto* yd = reinterpret_cast<double*>(y);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const __m256d xv = _mm256_loadu_pd(xd + 2 * i);
    const __m256d swapped = _mm256_permute_pd(xv, 0b0101);
    // [ar*xr - ai*xi, ar*xi + ai*xr]
    const __m256d prod = _mm256_fmaddsub_pd(ar, xv, _mm256_mul_pd(ai, swapped));
    _mm256_storeu_pd(yd + 2 * i, _mm256_add_pd(_mm256_loadu_pd(yd + 2 * i), prod));
  }
  for (; i < n; ++i) {
    const double xr = x[i].real();
    const double xi = x[i].imag();
    y[i] = {y[i].real() + (a.real() * xr - a.imag() * xi),
            y[i].imag() + (a.real() * xi + a.imag() * xr)};
  }
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d s0 = _mm256_setzero_pd();
  __m256d s1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    s0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), s0);
    s1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), s1);
  }
  double acc = hsum(_mm256_add_pd(s0, s1));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

}  // namespace

const KernelTable& avx2_kernel_table() {
  static const KernelTable table{"avx2", conv3x3_accumulate_avx2, conv3x3_weight_grad_avx2,
                                 complex_axpy_avx2, dot_avx2};
  return table;
}

}  // namespace psfnet::simd
