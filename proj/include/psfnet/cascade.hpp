#pragma once

#include <string_view>
#include <vector>

#include "psfnet/calibration.hpp"
#include "psfnet/consistency.hpp"
#include "psfnet/netdiff.hpp"

namespace psfnet {

enum class ModelKind { kPsfnet, kModl, kPsfnetSerial };

std::string_view to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view s);
inline bool uses_kernel(ModelKind kind) { return kind != ModelKind::kModl; }

// Trainable state of an unrolled network. The SG block is shared by every
// cascade; the fusion weights eta (scan-specific stream) and gamma
// (scan-general stream) are per cascade.
struct ModelParams {
  nd::SGBlockParams sg;
  std::vector<double> eta;
  std::vector<double> gamma;
  std::size_t cascades = 0;
  double lambda_dc = kStrictDc;

  void validate() const;
  // Flat views over every trainable array, in a fixed order.
  std::vector<std::span<double>> blocks();
  std::vector<std::span<const double>> blocks() const;
  std::size_t parameter_count() const;

  bool operator==(const ModelParams&) const = default;
};

// Fresh parameters: He-initialized SG block and eta = gamma = 0.5.
ModelParams init_model(std::size_t coils, std::size_t channels, std::size_t cascades,
                       std::uint64_t seed);

// Zero-valued copy with the same layout, used to accumulate gradients.
ModelParams zeros_like(const ModelParams& p);

struct ForwardOptions {
  // Re-applies strict data consistency to the fused output of the last cascade.
  bool final_dc = false;
};

struct ModelVars {
  nd::SGBlockVars sg;
  nd::Var eta;
  nd::Var gamma;
};

ModelVars bind(nd::Tape& t, const ModelParams& p, bool trainable);

// Tape-level forward passes. The starting image is ifft2c(und_ksp restricted to
// dc_mask); `kernel` is ignored for MoDL. `und_ksp`, `dc_mask` and `kernel` must
// outlive the tape.
nd::Var model_forward(nd::Tape& t, ModelKind kind, const ModelParams& p, const ModelVars& v,
                      const SSKernel* kernel, const ComplexTensor& und_ksp,
                      const MaskTensor& dc_mask, const ForwardOptions& opt = {});

// Value-only forward passes.
ComplexTensor psfnet_forward(const ModelParams& p, const SSKernel& kernel,
                             const ComplexTensor& und_ksp, const MaskTensor& dc_mask,
                             const ForwardOptions& opt = {});
ComplexTensor modl_forward(const ModelParams& p, const ComplexTensor& und_ksp,
                           const MaskTensor& dc_mask, const ForwardOptions& opt = {});
ComplexTensor psfnet_serial_forward(const ModelParams& p, const SSKernel& kernel,
                                    const ComplexTensor& und_ksp, const MaskTensor& dc_mask,
                                    const ForwardOptions& opt = {});
ComplexTensor model_forward(ModelKind kind, const ModelParams& p, const SSKernel* kernel,
                            const ComplexTensor& und_ksp, const MaskTensor& dc_mask,
                            const ForwardOptions& opt = {});

// sum_c conj(sens_maps[c]) * x[c], shape [h,w].
ComplexTensor coil_combine(const ComplexTensor& x, const ComplexTensor& sens_maps);

}  // namespace psfnet
