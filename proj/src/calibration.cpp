#include "psfnet/calibration.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <cmath>

#include "psfnet/consistency.hpp"
#include "psfnet/fft.hpp"
#include "psfnet/simd/kernels.hpp"

namespace psfnet {
namespace {

struct PatchGrid {
  std::size_t z, h, w, ksize, radius, ny, nx;

  std::size_t rows() const { return ny * nx; }
  std::size_t cols() const { return z * ksize * ksize; }
  std::size_t column(std::size_t coil, std::size_t dy, std::size_t dx) const {
    return (coil * ksize + dy) * ksize + dx;
  }
};

PatchGrid patch_grid(const ComplexTensor& ksp, const CalibWindow& calib, std::size_t ksize) {
  if (ksp.ndim() != 3) throw ShapeError("calibration: expected [z,h,w] k-space");
  if (ksize == 0 || ksize % 2 == 0) throw ConfigError("calibration: kernel size must be odd");
  if (calib.ch < ksize || calib.cw < ksize) {
    throw ConfigError("calibration window " + std::to_string(calib.ch) + "x" +
                      std::to_string(calib.cw) + " is smaller than the " + std::to_string(ksize) +
                      "x" + std::to_string(ksize) + " kernel");
  }
  if (calib.h0 + calib.ch > ksp.dim(1) || calib.w0 + calib.cw > ksp.dim(2)) {
    throw ConfigError("calibration window lies outside the k-space grid");
  }
  return {ksp.dim(0), ksp.dim(1), ksp.dim(2), ksize, ksize / 2,
          calib.ch - ksize + 1, calib.cw - ksize + 1};
}

Eigen::MatrixXcd patch_matrix(const ComplexTensor& ksp, const CalibWindow& calib,
                              const PatchGrid& g) {
  Eigen::MatrixXcd a(g.rows(), g.cols());
  for (std::size_t py = 0; py < g.ny; ++py) {
    for (std::size_t px = 0; px < g.nx; ++px) {
      const Eigen::Index row = Eigen::Index(py * g.nx + px);
      for (std::size_t c = 0; c < g.z; ++c) {
        for (std::size_t dy = 0; dy < g.ksize; ++dy) {
          for (std::size_t dx = 0; dx < g.ksize; ++dx) {
            a(row, Eigen::Index(g.column(c, dy, dx))) =
                ksp.at(c, calib.h0 + py + dy, calib.w0 + px + dx);
          }
        }
      }
    }
  }
  return a;
}

}  // namespace

SSKernel calibrate_kernel(const ComplexTensor& und_ksp, const CalibWindow& calib,
                          std::size_t kernel_size, double kappa) {
  if (!(kappa >= 0.0)) throw ConfigError("calibration: kappa must be >= 0");
  const PatchGrid g = patch_grid(und_ksp, calib, kernel_size);
  const Eigen::MatrixXcd a = patch_matrix(und_ksp, calib, g);
  const Eigen::MatrixXcd gram = a.adjoint() * a;
  const Eigen::Index n = Eigen::Index(g.cols());

  SSKernel kernel;
  kernel.kappa = kappa;
  kernel.kernel_size = kernel_size;
  kernel.weights = ComplexTensor({g.z, g.z, kernel_size, kernel_size}, cplx{0.0, 0.0});

  std::vector<Eigen::Index> keep;
  keep.reserve(std::size_t(n) - 1);
  for (std::size_t o = 0; o < g.z; ++o) {
    const Eigen::Index self = Eigen::Index(g.column(o, g.radius, g.radius));
    keep.clear();
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j != self) keep.push_back(j);
    }
    const Eigen::Index m = Eigen::Index(keep.size());
    Eigen::MatrixXcd normal(m, m);
    Eigen::VectorXcd rhs(m);
    for (Eigen::Index r = 0; r < m; ++r) {
      rhs(r) = gram(keep[r], self);
      for (Eigen::Index c = 0; c < m; ++c) normal(r, c) = gram(keep[r], keep[c]);
    }
    const double reg = kappa * normal.norm() / double(m);
    if (!std::isfinite(reg)) throw NumericError("calibration: non-finite regularization weight");
    normal.diagonal().array() += reg;

    Eigen::LLT<Eigen::MatrixXcd> llt(normal);
    if (llt.info() != Eigen::Success) {
      throw NumericError("calibration: normal equations are singular for output coil " +
                         std::to_string(o));
    }
    const Eigen::VectorXcd theta = llt.solve(rhs);
    if (!theta.allFinite()) throw NumericError("calibration: non-finite kernel weights");
    cplx* dst = kernel.weights.data() + o * std::size_t(n);
    for (Eigen::Index r = 0; r < m; ++r) dst[keep[r]] = theta(r);
  }
  return kernel;
}

std::pair<double, double> calibration_residual(const ComplexTensor& und_ksp,
                                               const CalibWindow& calib, const SSKernel& kernel) {
  const PatchGrid g = patch_grid(und_ksp, calib, kernel.kernel_size);
  const Eigen::MatrixXcd a = patch_matrix(und_ksp, calib, g);
  const Eigen::Index n = Eigen::Index(g.cols());
  double resid = 0.0;
  double target = 0.0;
  for (std::size_t o = 0; o < g.z; ++o) {
    const Eigen::Map<const Eigen::VectorXcd> theta(kernel.weights.data() + o * std::size_t(n), n);
    const Eigen::VectorXcd b = a.col(Eigen::Index(g.column(o, g.radius, g.radius)));
    resid += (a * theta - b).squaredNorm();
    target += b.squaredNorm();
  }
  return {std::sqrt(resid), std::sqrt(target)};
}

namespace {

void check_kernel(const SSKernel& kernel, const ComplexTensor& ksp) {
  if (ksp.ndim() != 3 || kernel.weights.ndim() != 4 || kernel.weights.dim(0) != ksp.dim(0) ||
      kernel.weights.dim(1) != ksp.dim(0)) {
    throw ShapeError("kernel " + shape_to_string(kernel.weights.shape()) +
                     " does not match k-space " + shape_to_string(ksp.shape()));
  }
}

// Core correlation with an explicit tap accessor so that the adjoint can reuse
// it with conjugated, flipped, coil-transposed taps.
template <typename Tap>
ComplexTensor correlate(std::size_t z, std::size_t ksize, const ComplexTensor& ksp, Tap tap) {
  const std::size_t h = ksp.dim(1);
  const std::size_t w = ksp.dim(2);
  const std::size_t r = ksize / 2;
  const std::size_t ph = h + 2 * r;
  const std::size_t pw = w + 2 * r;

  std::vector<cplx> padded(z * ph * pw, cplx{0.0, 0.0});
  for (std::size_t c = 0; c < z; ++c) {
    for (std::size_t y = 0; y < h; ++y) {
      std::copy_n(&ksp.at(c, y, 0), w, padded.data() + (c * ph + y + r) * pw + r);
    }
  }

  const auto& kern = simd::active_kernels();
  ComplexTensor out(ksp.shape(), cplx{0.0, 0.0});
  for (std::size_t o = 0; o < z; ++o) {
    cplx* dst = out.data() + o * h * w;
    for (std::size_t i = 0; i < z; ++i) {
      const cplx* src = padded.data() + i * ph * pw;
      for (std::size_t dy = 0; dy < ksize; ++dy) {
        for (std::size_t dx = 0; dx < ksize; ++dx) {
          const cplx a = tap(o, i, dy, dx);
          if (a == cplx{0.0, 0.0}) continue;
          for (std::size_t y = 0; y < h; ++y) {
            kern.complex_axpy(a, src + (y + dy) * pw + dx, dst + y * w, w);
          }
        }
      }
    }
  }
  return out;
}

}  // namespace

ComplexTensor kspace_correlate(const SSKernel& kernel, const ComplexTensor& ksp) {
  check_kernel(kernel, ksp);
  const std::size_t k = kernel.kernel_size;
  const auto& wt = kernel.weights;
  return correlate(ksp.dim(0), k, ksp, [&](std::size_t o, std::size_t i, std::size_t dy,
                                           std::size_t dx) {
    return wt[((o * wt.dim(1) + i) * k + dy) * k + dx];
  });
}

ComplexTensor kspace_correlate_adjoint(const SSKernel& kernel, const ComplexTensor& ksp) {
  check_kernel(kernel, ksp);
  const std::size_t k = kernel.kernel_size;
  const auto& wt = kernel.weights;
  // out[i,p] = sum_{o,t} conj(K[o,i,t]) g[o, p - t + r]: a correlation with
  // taps K'[i,o,t'] = conj(K[o,i,k-1-t']).
  return correlate(ksp.dim(0), k, ksp, [&](std::size_t i, std::size_t o, std::size_t dy,
                                           std::size_t dx) {
    return std::conj(wt[((o * wt.dim(1) + i) * k + (k - 1 - dy)) * k + (k - 1 - dx)]);
  });
}

ComplexTensor ss_apply(const SSKernel& kernel, const ComplexTensor& img) {
  ComplexTensor out = kspace_correlate(kernel, fft2c(img));
  ifft2c_inplace(out);
  return out;
}

ComplexTensor ss_apply_adjoint(const SSKernel& kernel, const ComplexTensor& img) {
  ComplexTensor out = kspace_correlate_adjoint(kernel, fft2c(img));
  ifft2c_inplace(out);
  return out;
}

ComplexTensor spirit_reconstruct(const ComplexTensor& und_ksp, const MaskTensor& mask,
                                 const SSKernel& kernel, std::size_t n_iter) {
  ComplexTensor x = ifft2c(und_ksp);
  for (std::size_t it = 0; it < n_iter; ++it) {
    x = dc_project(ss_apply(kernel, x), und_ksp, mask, kStrictDc);
  }
  return x;
}

}  // namespace psfnet
