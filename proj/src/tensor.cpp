#include "psfnet/tensor.hpp"

#include <cmath>
#include <sstream>

namespace psfnet {

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

void require_same_shape(const Shape& a, const Shape& b, const char* what) {
  if (a != b) {
    throw ShapeError(std::string(what) + ": shape mismatch " + shape_to_string(a) + " vs " +
                     shape_to_string(b));
  }
}

ComplexTensor operator+(const ComplexTensor& a, const ComplexTensor& b) {
  return lincomb(1.0, a, 1.0, b);
}

ComplexTensor operator-(const ComplexTensor& a, const ComplexTensor& b) {
  return lincomb(1.0, a, -1.0, b);
}

ComplexTensor operator*(cplx s, const ComplexTensor& a) {
  ComplexTensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = s * a[i];
  return out;
}

ComplexTensor lincomb(cplx a, const ComplexTensor& x, cplx b, const ComplexTensor& z) {
  require_same_shape(x, z, "lincomb");
  ComplexTensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = a * x[i] + b * z[i];
  return out;
}

RealTensor magnitude(const ComplexTensor& x) {
  RealTensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = std::abs(x[i]);
  return out;
}

ComplexTensor to_complex(const RealTensor& x) {
  ComplexTensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i];
  return out;
}

double real_inner(const ComplexTensor& a, const ComplexTensor& b) {
  require_same_shape(a, b, "real_inner");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    acc += a[i].real() * b[i].real() + a[i].imag() * b[i].imag();
  }
  return acc;
}

bool all_finite(const ComplexTensor& x) {
  for (const auto& v : x.storage()) {
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
  }
  return true;
}

bool all_finite(const RealTensor& x) {
  for (double v : x.storage()) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace psfnet
