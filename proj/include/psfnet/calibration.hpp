#pragma once

#include <cstddef>
#include <utility>

#include "psfnet/sampling.hpp"
#include "psfnet/tensor.hpp"

namespace psfnet {

// Scan-specific linear k-space interpolation kernel. weights has shape
// [z_out, z_in, w, w]; for each output coil the centre tap of the same input
// coil is zero so a sample is always predicted from its neighbours.
struct SSKernel {
  ComplexTensor weights;
  double kappa = 0.0;
  std::size_t kernel_size = 0;

  std::size_t coils() const { return weights.dim(0); }
  std::size_t radius() const { return kernel_size / 2; }
};

// Fits the kernel to the fully sampled calibration window of `und_ksp`
// ([z,h,w]) by Tikhonov-regularized least squares over every w x w patch that
// lies inside the window. The regularization weight is
// kappa * ||A^H A||_F / n_cols, which makes kappa independent of grid size.
SSKernel calibrate_kernel(const ComplexTensor& und_ksp, const CalibWindow& calib,
                          std::size_t kernel_size, double kappa);

// Least-squares residual of `kernel` on the calibration patches, summed over
// output coils, together with the norm of the targets (the zero-kernel
// residual).
std::pair<double, double> calibration_residual(const ComplexTensor& und_ksp,
                                               const CalibWindow& calib, const SSKernel& kernel);

// k-space cross-correlation of all input coils with the kernel, zero padded
// outside the grid: out[o,p] = sum_{i,t} K[o,i,t] * ksp[i, p + t - r].
ComplexTensor kspace_correlate(const SSKernel& kernel, const ComplexTensor& ksp);

// Adjoint of kspace_correlate.
ComplexTensor kspace_correlate_adjoint(const SSKernel& kernel, const ComplexTensor& ksp);

// Image-domain view of the kernel: ifft2c(correlate(fft2c(img))).
ComplexTensor ss_apply(const SSKernel& kernel, const ComplexTensor& img);
ComplexTensor ss_apply_adjoint(const SSKernel& kernel, const ComplexTensor& img);

// Iterative self-consistent reconstruction: starting from the zero-filled
// image, x <- dc_project(ss_apply(kernel, x)) with strict data consistency.
ComplexTensor spirit_reconstruct(const ComplexTensor& und_ksp, const MaskTensor& mask,
                                 const SSKernel& kernel, std::size_t n_iter);

}  // namespace psfnet
