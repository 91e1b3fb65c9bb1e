#include "psfnet/cascade.hpp"

#include <cmath>

#include "psfnet/simulate.hpp"

namespace psfnet {

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::kPsfnet: return "psfnet";
    case ModelKind::kModl: return "modl";
    case ModelKind::kPsfnetSerial: return "psfnet_serial";
  }
  return "?";
}

ModelKind parse_model_kind(std::string_view s) {
  if (s == "psfnet") return ModelKind::kPsfnet;
  if (s == "modl") return ModelKind::kModl;
  if (s == "psfnet_serial") return ModelKind::kPsfnetSerial;
  throw ConfigError("unknown model '" + std::string(s) + "' (expected psfnet|modl|psfnet_serial)");
}

void ModelParams::validate() const {
  if (cascades < 1) throw ConfigError("model: at least one cascade is required");
  if (eta.size() != cascades || gamma.size() != cascades) {
    throw ConfigError("model: expected one eta and one gamma per cascade");
  }
  for (std::size_t k = 0; k < cascades; ++k) {
    if (!std::isfinite(eta[k]) || !std::isfinite(gamma[k])) {
      throw NumericError("model: non-finite fusion weight");
    }
  }
  if (!(lambda_dc > 0.0)) throw ConfigError("model: lambda_dc must be in (0, inf]");
}

std::vector<std::span<double>> ModelParams::blocks() {
  std::vector<std::span<double>> out;
  for (std::size_t l = 0; l < nd::SGBlockParams::kLayers; ++l) {
    out.emplace_back(sg.weights[l].span());
    out.emplace_back(sg.biases[l].span());
  }
  out.emplace_back(eta);
  out.emplace_back(gamma);
  return out;
}

std::vector<std::span<const double>> ModelParams::blocks() const {
  std::vector<std::span<const double>> out;
  for (auto s : const_cast<ModelParams*>(this)->blocks()) out.emplace_back(s);
  return out;
}

std::size_t ModelParams::parameter_count() const {
  return sg.parameter_count() + eta.size() + gamma.size();
}

ModelParams init_model(std::size_t coils, std::size_t channels, std::size_t cascades,
                       std::uint64_t seed) {
  ModelParams p;
  p.sg = nd::init_params(coils, channels, seed);
  p.cascades = cascades;
  p.eta.assign(cascades, 0.5);
  p.gamma.assign(cascades, 0.5);
  p.validate();
  return p;
}

ModelParams zeros_like(const ModelParams& p) {
  ModelParams z = p;
  for (auto b : z.blocks()) std::fill(b.begin(), b.end(), 0.0);
  return z;
}

ModelVars bind(nd::Tape& t, const ModelParams& p, bool trainable) {
  ModelVars v;
  v.sg = nd::bind(t, p.sg, trainable);
  const RealTensor eta({p.eta.size()}, p.eta);
  const RealTensor gamma({p.gamma.size()}, p.gamma);
  v.eta = trainable ? t.parameter(eta) : t.constant(eta);
  v.gamma = trainable ? t.parameter(gamma) : t.constant(gamma);
  return v;
}

nd::Var model_forward(nd::Tape& t, ModelKind kind, const ModelParams& p, const ModelVars& v,
                      const SSKernel* kernel, const ComplexTensor& und_ksp,
                      const MaskTensor& dc_mask, const ForwardOptions& opt) {
  p.validate();
  if (uses_kernel(kind) && kernel == nullptr) {
    throw ConfigError(std::string(to_string(kind)) + " needs a calibrated kernel");
  }
  if (und_ksp.ndim() != 3 || und_ksp.dim(0) != p.sg.coils) {
    throw ShapeError("forward: k-space " + shape_to_string(und_ksp.shape()) +
                     " does not match a model for " + std::to_string(p.sg.coils) + " coils");
  }
  const std::size_t z = p.sg.coils;
  const double lambda = p.lambda_dc;

  // For the full acquisition mask this is und_ksp itself.
  nd::Var x = nd::ifft2c(t, t.constant(apply_mask(und_ksp, dc_mask)));
  for (std::size_t k = 0; k < p.cascades; ++k) {
    switch (kind) {
      case ModelKind::kPsfnet: {
        const nd::Var ss = nd::dc_project(t, nd::ss_apply(t, *kernel, x), und_ksp, dc_mask, lambda);
        const nd::Var sg = nd::dc_project(t, nd::sg_forward(t, v.sg, z, x), und_ksp, dc_mask, lambda);
        x = nd::add(t, nd::scale(t, v.eta, k, ss), nd::scale(t, v.gamma, k, sg));
        break;
      }
      case ModelKind::kModl:
        x = nd::dc_project(t, nd::sg_forward(t, v.sg, z, x), und_ksp, dc_mask, lambda);
        break;
      case ModelKind::kPsfnetSerial:
        x = nd::dc_project(t, nd::sg_forward(t, v.sg, z, nd::ss_apply(t, *kernel, x)), und_ksp,
                           dc_mask, lambda);
        break;
    }
  }
  if (opt.final_dc) x = nd::dc_project(t, x, und_ksp, dc_mask, kStrictDc);
  return x;
}

ComplexTensor model_forward(ModelKind kind, const ModelParams& p, const SSKernel* kernel,
                            const ComplexTensor& und_ksp, const MaskTensor& dc_mask,
                            const ForwardOptions& opt) {
  nd::Tape t(false);
  const ModelVars v = bind(t, p, false);
  return t.complex_tensor(model_forward(t, kind, p, v, kernel, und_ksp, dc_mask, opt));
}

ComplexTensor psfnet_forward(const ModelParams& p, const SSKernel& kernel,
                             const ComplexTensor& und_ksp, const MaskTensor& dc_mask,
                             const ForwardOptions& opt) {
  return model_forward(ModelKind::kPsfnet, p, &kernel, und_ksp, dc_mask, opt);
}

ComplexTensor modl_forward(const ModelParams& p, const ComplexTensor& und_ksp,
                           const MaskTensor& dc_mask, const ForwardOptions& opt) {
  return model_forward(ModelKind::kModl, p, nullptr, und_ksp, dc_mask, opt);
}

ComplexTensor psfnet_serial_forward(const ModelParams& p, const SSKernel& kernel,
                                    const ComplexTensor& und_ksp, const MaskTensor& dc_mask,
                                    const ForwardOptions& opt) {
  return model_forward(ModelKind::kPsfnetSerial, p, &kernel, und_ksp, dc_mask, opt);
}

ComplexTensor coil_combine(const ComplexTensor& x, const ComplexTensor& sens_maps) {
  require_same_shape(x, sens_maps, "coil_combine");
  if (x.ndim() != 3) throw ShapeError("coil_combine: expected [z,h,w]");
  const std::size_t z = x.dim(0);
  const std::size_t plane = x.dim(1) * x.dim(2);
  ComplexTensor out({x.dim(1), x.dim(2)}, cplx{0.0, 0.0});
  for (std::size_t c = 0; c < z; ++c) {
    for (std::size_t i = 0; i < plane; ++i) {
      out[i] += std::conj(sens_maps[c * plane + i]) * x[c * plane + i];
    }
  }
  return out;
}

}  // namespace psfnet
