#include "psfnet/consistency.hpp"

#include <algorithm>
#include <cmath>

#include "psfnet/fft.hpp"

namespace psfnet {
namespace {

void check_args(const ComplexTensor& x, const MaskTensor& dc_mask, double lambda) {
  if (x.ndim() != 3 || dc_mask.ndim() != 2 || x.dim(1) != dc_mask.dim(0) ||
      x.dim(2) != dc_mask.dim(1)) {
    throw ShapeError("dc_project: image " + shape_to_string(x.shape()) + " vs mask " +
                     shape_to_string(dc_mask.shape()));
  }
  if (!(lambda > 0.0)) throw ConfigError("dc_project: lambda must be in (0, inf]");
}

bool mask_empty(const MaskTensor& m) {
  return std::none_of(m.storage().begin(), m.storage().end(), [](std::uint8_t v) { return v != 0; });
}

}  // namespace

ComplexTensor dc_project(const ComplexTensor& x, const ComplexTensor& und_ksp,
                         const MaskTensor& dc_mask, double lambda) {
  check_args(x, dc_mask, lambda);
  require_same_shape(x, und_ksp, "dc_project");
  if (mask_empty(dc_mask)) return x;

  ComplexTensor k = fft2c(x);
  const std::size_t plane = dc_mask.size();
  const bool strict = std::isinf(lambda);
  const double keep = strict ? 0.0 : 1.0 / (1.0 + lambda);
  const double take = strict ? 1.0 : lambda / (1.0 + lambda);
  for (std::size_t i = 0; i < k.size(); ++i) {
    if (!dc_mask[i % plane]) continue;
    k[i] = strict ? und_ksp[i] : keep * k[i] + take * und_ksp[i];
  }
  ifft2c_inplace(k);
  return k;
}

ComplexTensor dc_linear_part(const ComplexTensor& g, const MaskTensor& dc_mask, double lambda) {
  check_args(g, dc_mask, lambda);
  if (mask_empty(dc_mask)) return g;
  ComplexTensor k = fft2c(g);
  const std::size_t plane = dc_mask.size();
  const double keep = std::isinf(lambda) ? 0.0 : 1.0 / (1.0 + lambda);
  for (std::size_t i = 0; i < k.size(); ++i) {
    if (dc_mask[i % plane]) k[i] *= keep;
  }
  ifft2c_inplace(k);
  return k;
}

}  // namespace psfnet
