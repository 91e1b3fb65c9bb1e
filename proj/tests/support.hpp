#pragma once

#include <algorithm>
#include <cmath>
#include <random>

#include "psfnet/tensor.hpp"

namespace psfnet::test {

inline ComplexTensor random_complex(Shape shape, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  ComplexTensor t(std::move(shape));
  for (cplx& v : t.storage()) v = cplx(n(rng), n(rng));
  return t;
}

inline RealTensor random_real(Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  RealTensor t(std::move(shape));
  for (double& v : t.storage()) v = u(rng);
  return t;
}

inline double l2(const ComplexTensor& a) {
  double s = 0.0;
  for (const cplx& v : a.storage()) s += std::norm(v);
  return std::sqrt(s);
}

// ||a - b|| / max(||b||, tiny)
inline double rel_diff(const ComplexTensor& a, const ComplexTensor& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += std::norm(a[i] - b[i]);
    den += std::norm(b[i]);
  }
  return std::sqrt(num) / std::max(std::sqrt(den), 1e-300);
}

inline double max_abs_diff(const ComplexTensor& a, const ComplexTensor& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline double max_abs_diff(const RealTensor& a, const RealTensor& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// Complex inner product <a, b> = sum conj(a) b.
inline cplx inner(const ComplexTensor& a, const ComplexTensor& b) {
  cplx s{0.0, 0.0};
  for (std::size_t i = 0; i < a.size(); ++i) s += std::conj(a[i]) * b[i];
  return s;
}

inline MaskTensor random_mask(std::size_t h, std::size_t w, double p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution b(p);
  MaskTensor m({h, w});
  for (auto& v : m.storage()) v = b(rng) ? 1 : 0;
  return m;
}

}  // namespace psfnet::test
