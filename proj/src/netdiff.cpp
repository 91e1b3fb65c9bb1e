#include "psfnet/netdiff.hpp"

#include <algorithm>
#include <cmath>

#include "psfnet/consistency.hpp"
#include "psfnet/fft.hpp"
#include "psfnet/simd/kernels.hpp"

namespace psfnet::nd {

// ---------------------------------------------------------------------------
// Tape

const Tape::Node& Tape::node(Var v) const {
  if (v.id >= nodes_.size()) throw StateError("tape: invalid variable");
  return nodes_[v.id];
}

Tape::Node& Tape::node(Var v) {
  if (v.id >= nodes_.size()) throw StateError("tape: invalid variable");
  return nodes_[v.id];
}

void Tape::ensure_grad(Node& n) {
  if (n.is_complex) {
    if (n.cg.size() != n.cv.size()) n.cg.assign(n.cv.size(), cplx{0.0, 0.0});
  } else {
    if (n.rg.size() != n.rv.size()) n.rg.assign(n.rv.size(), 0.0);
  }
}

Var Tape::push_real(RealTensor value, bool requires_grad) {
  Node n;
  n.shape = value.shape();
  n.is_complex = false;
  n.requires_grad = record_ && requires_grad;
  n.rv = std::move(value.storage());
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

Var Tape::push_complex(ComplexTensor value, bool requires_grad) {
  Node n;
  n.shape = value.shape();
  n.is_complex = true;
  n.requires_grad = record_ && requires_grad;
  n.cv = std::move(value.storage());
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

void Tape::set_backward(Var v, BackwardFn fn) {
  Node& n = node(v);
  if (record_ && n.requires_grad) n.backward = std::move(fn);
}

Var Tape::constant(ComplexTensor value) { return push_complex(std::move(value), false); }
Var Tape::constant(RealTensor value) { return push_real(std::move(value), false); }
Var Tape::parameter(RealTensor value) { return push_real(std::move(value), true); }

std::span<const double> Tape::real(Var v) const {
  const Node& n = node(v);
  if (n.is_complex) throw StateError("tape: expected a real variable");
  return n.rv;
}

std::span<const cplx> Tape::complex(Var v) const {
  const Node& n = node(v);
  if (!n.is_complex) throw StateError("tape: expected a complex variable");
  return n.cv;
}

std::span<double> Tape::real_grad(Var v) {
  Node& n = node(v);
  if (n.is_complex) throw StateError("tape: expected a real variable");
  ensure_grad(n);
  return n.rg;
}

std::span<cplx> Tape::complex_grad(Var v) {
  Node& n = node(v);
  if (!n.is_complex) throw StateError("tape: expected a complex variable");
  ensure_grad(n);
  return n.cg;
}

std::span<const double> Tape::real_grad(Var v) const {
  const Node& n = node(v);
  if (n.is_complex) throw StateError("tape: expected a real variable");
  if (n.rg.size() != n.rv.size()) throw StateError("tape: gradient requested before backward");
  return n.rg;
}

std::span<const cplx> Tape::complex_grad(Var v) const {
  const Node& n = node(v);
  if (!n.is_complex) throw StateError("tape: expected a complex variable");
  if (n.cg.size() != n.cv.size()) throw StateError("tape: gradient requested before backward");
  return n.cg;
}

RealTensor Tape::real_tensor(Var v) const {
  const Node& n = node(v);
  if (n.is_complex) throw StateError("tape: expected a real variable");
  return RealTensor(n.shape, n.rv);
}

ComplexTensor Tape::complex_tensor(Var v) const {
  const Node& n = node(v);
  if (!n.is_complex) throw StateError("tape: expected a complex variable");
  return ComplexTensor(n.shape, n.cv);
}

double Tape::scalar(Var v) const {
  const auto r = real(v);
  if (r.size() != 1) throw ShapeError("tape: variable is not a scalar");
  return r[0];
}

void Tape::backward(Var loss) {
  if (nodes_.empty()) throw StateError("backward called before any forward pass");
  if (!record_) throw StateError("backward called on a non-recording tape");
  if (swept_) throw StateError("backward already ran on this tape");
  Node& root = node(loss);
  if (root.is_complex || root.rv.size() != 1) throw StateError("backward needs a real scalar loss");
  for (auto& n : nodes_) {
    if (n.requires_grad) ensure_grad(n);
  }
  swept_ = true;
  if (!root.requires_grad) return;
  root.rg[0] = 1.0;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    if (nodes_[i].backward) nodes_[i].backward(*this);
  }
}

// ---------------------------------------------------------------------------
// Primitives

namespace {

std::vector<double> pad_planes(std::span<const double> src, std::size_t planes, std::size_t h,
                               std::size_t w) {
  const std::size_t ph = h + 2;
  const std::size_t pw = w + 2;
  std::vector<double> out(planes * ph * pw, 0.0);
  for (std::size_t p = 0; p < planes; ++p) {
    for (std::size_t y = 0; y < h; ++y) {
      std::copy_n(src.data() + (p * h + y) * w, w, out.data() + (p * ph + y + 1) * pw + 1);
    }
  }
  return out;
}

void require(bool ok, const std::string& msg) {
  if (!ok) throw ShapeError(msg);
}

}  // namespace

Var conv2d(Tape& t, Var x, Var weight, Var bias) {
  const Shape& xs = t.shape(x);
  const Shape& ws = t.shape(weight);
  require(!t.is_complex(x) && xs.size() == 3, "conv2d: input must be real [C,h,w]");
  require(ws.size() == 4 && ws[2] == 3 && ws[3] == 3 && ws[1] == xs[0],
          "conv2d: weight " + shape_to_string(ws) + " does not match input " + shape_to_string(xs));
  require(t.shape(bias) == Shape{ws[0]}, "conv2d: bias must have one entry per output channel");
  const std::size_t cin = xs[0];
  const std::size_t cout = ws[0];
  const std::size_t h = xs[1];
  const std::size_t w = xs[2];
  const std::size_t plane = h * w;
  const std::size_t pplane = (h + 2) * (w + 2);
  const auto& kern = simd::active_kernels();

  const std::vector<double> xpad = pad_planes(t.real(x), cin, h, w);
  const auto wt = t.real(weight);
  const auto bs = t.real(bias);
  RealTensor out({cout, h, w});
  for (std::size_t o = 0; o < cout; ++o) {
    double* dst = out.data() + o * plane;
    std::fill_n(dst, plane, bs[o]);
    for (std::size_t i = 0; i < cin; ++i) {
      kern.conv3x3_accumulate(xpad.data() + i * pplane, h, w, wt.data() + (o * cin + i) * 9, dst);
    }
  }

  const bool needs = t.requires_grad(x) || t.requires_grad(weight) || t.requires_grad(bias);
  const Var y = t.push_real(std::move(out), needs);
  t.set_backward(y, [=](Tape& tp) {
    const auto& k = simd::active_kernels();
    const auto g = tp.real_grad(y);
    if (tp.requires_grad(bias)) {
      auto gb = tp.real_grad(bias);
      for (std::size_t o = 0; o < cout; ++o) {
        const double* go = g.data() + o * plane;
        double acc = 0.0;
        for (std::size_t j = 0; j < plane; ++j) acc += go[j];
        gb[o] += acc;
      }
    }
    if (tp.requires_grad(weight)) {
      const std::vector<double> xp = pad_planes(tp.real(x), cin, h, w);
      auto gw = tp.real_grad(weight);
      for (std::size_t o = 0; o < cout; ++o) {
        for (std::size_t i = 0; i < cin; ++i) {
          k.conv3x3_weight_grad(xp.data() + i * pplane, g.data() + o * plane, h, w,
                                gw.data() + (o * cin + i) * 9);
        }
      }
    }
    if (tp.requires_grad(x)) {
      const std::vector<double> gp = pad_planes(g, cout, h, w);
      const auto wv = tp.real(weight);
      auto gx = tp.real_grad(x);
      double flipped[9];
      for (std::size_t i = 0; i < cin; ++i) {
        for (std::size_t o = 0; o < cout; ++o) {
          const double* w9 = wv.data() + (o * cin + i) * 9;
          for (int j = 0; j < 9; ++j) flipped[j] = w9[8 - j];
          k.conv3x3_accumulate(gp.data() + o * pplane, h, w, flipped, gx.data() + i * plane);
        }
      }
    }
  });
  return y;
}

Var relu(Tape& t, Var x) {
  require(!t.is_complex(x), "relu: input must be real");
  const auto xv = t.real(x);
  RealTensor out(t.shape(x));
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = xv[i] > 0.0 ? xv[i] : 0.0;
  const Var y = t.push_real(std::move(out), t.requires_grad(x));
  t.set_backward(y, [=](Tape& tp) {
    const auto g = tp.real_grad(y);
    const auto in = tp.real(x);
    auto gx = tp.real_grad(x);
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (in[i] > 0.0) gx[i] += g[i];
    }
  });
  return y;
}

Var add(Tape& t, Var a, Var b) {
  require(t.shape(a) == t.shape(b) && t.is_complex(a) == t.is_complex(b), "add: operand mismatch");
  const bool needs = t.requires_grad(a) || t.requires_grad(b);
  Var y;
  if (t.is_complex(a)) {
    const auto av = t.complex(a);
    const auto bv = t.complex(b);
    ComplexTensor out(t.shape(a));
    for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] + bv[i];
    y = t.push_complex(std::move(out), needs);
    t.set_backward(y, [=](Tape& tp) {
      const auto g = tp.complex_grad(y);
      for (Var in : {a, b}) {
        if (!tp.requires_grad(in)) continue;
        auto gi = tp.complex_grad(in);
        for (std::size_t i = 0; i < g.size(); ++i) gi[i] += g[i];
      }
    });
  } else {
    const auto av = t.real(a);
    const auto bv = t.real(b);
    RealTensor out(t.shape(a));
    for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] + bv[i];
    y = t.push_real(std::move(out), needs);
    t.set_backward(y, [=](Tape& tp) {
      const auto g = tp.real_grad(y);
      for (Var in : {a, b}) {
        if (!tp.requires_grad(in)) continue;
        auto gi = tp.real_grad(in);
        for (std::size_t i = 0; i < g.size(); ++i) gi[i] += g[i];
      }
    });
  }
  return y;
}

Var scale(Tape& t, Var scalars, std::size_t index, Var x) {
  require(!t.is_complex(scalars) && index < t.real(scalars).size(), "scale: bad scalar index");
  require(t.is_complex(x), "scale: input must be complex");
  const double s = t.real(scalars)[index];
  const auto xv = t.complex(x);
  ComplexTensor out(t.shape(x));
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = s * xv[i];
  const Var y = t.push_complex(std::move(out), t.requires_grad(scalars) || t.requires_grad(x));
  t.set_backward(y, [=](Tape& tp) {
    const auto g = tp.complex_grad(y);
    if (tp.requires_grad(scalars)) {
      const auto in = tp.complex(x);
      double acc = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) {
        acc += g[i].real() * in[i].real() + g[i].imag() * in[i].imag();
      }
      tp.real_grad(scalars)[index] += acc;
    }
    if (tp.requires_grad(x)) {
      const double sv = tp.real(scalars)[index];
      auto gx = tp.complex_grad(x);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += sv * g[i];
    }
  });
  return y;
}

Var pack_complex(Tape& t, Var x) {
  require(t.is_complex(x) && t.shape(x).size() == 3, "pack_complex: input must be complex [z,h,w]");
  const Shape& s = t.shape(x);
  const std::size_t z = s[0];
  const std::size_t plane = s[1] * s[2];
  const auto xv = t.complex(x);
  RealTensor out({2 * z, s[1], s[2]});
  for (std::size_t c = 0; c < z; ++c) {
    for (std::size_t j = 0; j < plane; ++j) {
      out[(2 * c) * plane + j] = xv[c * plane + j].real();
      out[(2 * c + 1) * plane + j] = xv[c * plane + j].imag();
    }
  }
  const Var y = t.push_real(std::move(out), t.requires_grad(x));
  t.set_backward(y, [=](Tape& tp) {
    const auto g = tp.real_grad(y);
    auto gx = tp.complex_grad(x);
    for (std::size_t c = 0; c < z; ++c) {
      for (std::size_t j = 0; j < plane; ++j) {
        gx[c * plane + j] += cplx{g[(2 * c) * plane + j], g[(2 * c + 1) * plane + j]};
      }
    }
  });
  return y;
}

Var unpack_complex(Tape& t, Var x) {
  const Shape& s = t.shape(x);
  require(!t.is_complex(x) && s.size() == 3 && s[0] % 2 == 0,
          "unpack_complex: input must be real [2z,h,w]");
  const std::size_t z = s[0] / 2;
  const std::size_t plane = s[1] * s[2];
  const auto xv = t.real(x);
  ComplexTensor out({z, s[1], s[2]});
  for (std::size_t c = 0; c < z; ++c) {
    for (std::size_t j = 0; j < plane; ++j) {
      out[c * plane + j] = {xv[(2 * c) * plane + j], xv[(2 * c + 1) * plane + j]};
    }
  }
  const Var y = t.push_complex(std::move(out), t.requires_grad(x));
  t.set_backward(y, [=](Tape& tp) {
    const auto g = tp.complex_grad(y);
    auto gx = tp.real_grad(x);
    for (std::size_t c = 0; c < z; ++c) {
      for (std::size_t j = 0; j < plane; ++j) {
        gx[(2 * c) * plane + j] += g[c * plane + j].real();
        gx[(2 * c + 1) * plane + j] += g[c * plane + j].imag();
      }
    }
  });
  return y;
}

namespace {

// Registers y = op(x) for a fixed complex-linear operator with adjoint `adj`.
template <typename Op, typename Adj>
Var linear_node(Tape& t, Var x, Op op, Adj adj) {
  require(t.is_complex(x), "linear operator: input must be complex");
  ComplexTensor out = op(t.complex_tensor(x));
  const Var y = t.push_complex(std::move(out), t.requires_grad(x));
  t.set_backward(y, [=](Tape& tp) {
    const auto g = tp.complex_grad(y);
    const ComplexTensor back = adj(ComplexTensor(tp.shape(y), std::vector<cplx>(g.begin(), g.end())));
    auto gx = tp.complex_grad(x);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += back[i];
  });
  return y;
}

}  // namespace

Var fft2c(Tape& t, Var x) {
  return linear_node(
      t, x, [](const ComplexTensor& v) { return psfnet::fft2c(v); },
      [](const ComplexTensor& g) { return psfnet::ifft2c(g); });
}

Var ifft2c(Tape& t, Var x) {
  return linear_node(
      t, x, [](const ComplexTensor& v) { return psfnet::ifft2c(v); },
      [](const ComplexTensor& g) { return psfnet::fft2c(g); });
}

Var ss_apply(Tape& t, const SSKernel& kernel, Var x) {
  const SSKernel* k = &kernel;
  return linear_node(
      t, x, [k](const ComplexTensor& v) { return psfnet::ss_apply(*k, v); },
      [k](const ComplexTensor& g) { return psfnet::ss_apply_adjoint(*k, g); });
}

Var dc_project(Tape& t, Var x, const ComplexTensor& und_ksp, const MaskTensor& dc_mask,
               double lambda) {
  const ComplexTensor* y = &und_ksp;
  const MaskTensor* m = &dc_mask;
  // Affine map: the constant term does not affect the gradient, and the linear
  // part is self-adjoint.
  return linear_node(
      t, x, [=](const ComplexTensor& v) { return psfnet::dc_project(v, *y, *m, lambda); },
      [=](const ComplexTensor& g) { return psfnet::dc_linear_part(g, *m, lambda); });
}

Var squared_norm(Tape& t, Var x) {
  double acc = 0.0;
  if (t.is_complex(x)) {
    for (const cplx& v : t.complex(x)) acc += std::norm(v);
  } else {
    for (double v : t.real(x)) acc += v * v;
  }
  const Var y = t.push_real(RealTensor({1}, acc), t.requires_grad(x));
  t.set_backward(y, [=](Tape& tp) {
    const double g = tp.real_grad(y)[0];
    if (tp.is_complex(x)) {
      const auto in = tp.complex(x);
      auto gx = tp.complex_grad(x);
      for (std::size_t i = 0; i < in.size(); ++i) gx[i] += 2.0 * g * in[i];
    } else {
      const auto in = tp.real(x);
      auto gx = tp.real_grad(x);
      for (std::size_t i = 0; i < in.size(); ++i) gx[i] += 2.0 * g * in[i];
    }
  });
  return y;
}

Var real_sum(Tape& t, Var x) {
  double acc = 0.0;
  if (t.is_complex(x)) {
    for (const cplx& v : t.complex(x)) acc += v.real();
  } else {
    for (double v : t.real(x)) acc += v;
  }
  const Var y = t.push_real(RealTensor({1}, acc), t.requires_grad(x));
  t.set_backward(y, [=](Tape& tp) {
    const double g = tp.real_grad(y)[0];
    if (tp.is_complex(x)) {
      for (cplx& v : tp.complex_grad(x)) v += g;
    } else {
      for (double& v : tp.real_grad(x)) v += g;
    }
  });
  return y;
}

Var hybrid_loss(Tape& t, Var pred, const ComplexTensor& target, const MaskTensor* plane_mask) {
  require(t.is_complex(pred) && t.shape(pred) == target.shape(),
          "hybrid_loss: prediction " + shape_to_string(t.shape(pred)) + " vs target " +
              shape_to_string(target.shape()));
  const std::size_t plane = plane_mask ? plane_mask->size() : 0;
  if (plane_mask) {
    require(target.ndim() >= 2 && target.size() % plane == 0 &&
                target.dim(target.ndim() - 1) == plane_mask->dim(1),
            "hybrid_loss: mask does not match target planes");
  }
  const auto pv = t.complex(pred);
  std::size_t n = 0;
  double l1 = 0.0;
  double l2sq = 0.0;
  for (std::size_t i = 0; i < pv.size(); ++i) {
    if (plane_mask && !(*plane_mask)[i % plane]) continue;
    const cplx d = pv[i] - target[i];
    l1 += std::abs(d);
    l2sq += std::norm(d);
    ++n;
  }
  if (n == 0) throw ConfigError("hybrid_loss: no entries selected");
  const double nn = double(n);
  const double l2 = std::sqrt(l2sq);
  const Var y = t.push_real(RealTensor({1}, l1 / nn + l2 / std::sqrt(nn)), t.requires_grad(pred));
  const ComplexTensor* tgt = &target;
  t.set_backward(y, [=](Tape& tp) {
    const double g = tp.real_grad(y)[0];
    const auto p = tp.complex(pred);
    auto gp = tp.complex_grad(pred);
    const double c2 = l2 > 0.0 ? g / (l2 * std::sqrt(nn)) : 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (plane_mask && !(*plane_mask)[i % plane]) continue;
      const cplx d = p[i] - (*tgt)[i];
      const double mag = std::abs(d);
      if (mag > 0.0) gp[i] += d * (g / (mag * nn));
      gp[i] += c2 * d;
    }
  });
  return y;
}

// ---------------------------------------------------------------------------
// Scan-general block

std::size_t SGBlockParams::layer_in(std::size_t layer) const {
  return layer == 0 ? 2 * coils : channels;
}

std::size_t SGBlockParams::layer_out(std::size_t layer) const {
  return layer + 1 == kLayers ? 2 * coils : channels;
}

std::size_t SGBlockParams::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < kLayers; ++l) n += weights[l].size() + biases[l].size();
  return n;
}

std::size_t sg_parameter_count(std::size_t coils, std::size_t channels) {
  const std::size_t z2 = 2 * coils;
  return 9 * (z2 * channels + 4 * channels * channels + channels * z2) + 5 * channels + z2;
}

SGBlockParams zero_params(std::size_t coils, std::size_t channels) {
  if (coils < 1 || channels < 1) throw ConfigError("SG block: coils and channels must be >= 1");
  SGBlockParams p;
  p.coils = coils;
  p.channels = channels;
  for (std::size_t l = 0; l < SGBlockParams::kLayers; ++l) {
    p.weights[l] = RealTensor({p.layer_out(l), p.layer_in(l), 3, 3}, 0.0);
    p.biases[l] = RealTensor({p.layer_out(l)}, 0.0);
  }
  return p;
}

SGBlockParams init_params(std::size_t coils, std::size_t channels, std::uint64_t seed) {
  SGBlockParams p = zero_params(coils, channels);
  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l < SGBlockParams::kLayers; ++l) {
    const double fan_in = double(p.layer_in(l) * 9);
    const double bound = std::sqrt(6.0 / fan_in);
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (double& v : p.weights[l].storage()) v = dist(rng);
  }
  return p;
}

SGBlockParams identity_params(std::size_t coils) {
  SGBlockParams p = zero_params(coils, 4 * coils);
  const std::size_t real_ch = 2 * coils;
  constexpr std::size_t kCenter = 4;
  auto tap = [](RealTensor& w, std::size_t o, std::size_t i) -> double& {
    return w[(o * w.dim(1) + i) * 9 + kCenter];
  };
  for (std::size_t j = 0; j < real_ch; ++j) {
    tap(p.weights[0], 2 * j, j) = 1.0;
    tap(p.weights[0], 2 * j + 1, j) = -1.0;
    tap(p.weights[5], j, 2 * j) = 1.0;
    tap(p.weights[5], j, 2 * j + 1) = -1.0;
  }
  for (std::size_t l = 1; l + 1 < SGBlockParams::kLayers; ++l) {
    for (std::size_t c = 0; c < p.channels; ++c) tap(p.weights[l], c, c) = 1.0;
  }
  return p;
}

SGBlockVars bind(Tape& t, const SGBlockParams& p, bool trainable) {
  SGBlockVars v;
  for (std::size_t l = 0; l < SGBlockParams::kLayers; ++l) {
    v.weights[l] = trainable ? t.parameter(p.weights[l]) : t.constant(p.weights[l]);
    v.biases[l] = trainable ? t.parameter(p.biases[l]) : t.constant(p.biases[l]);
  }
  return v;
}

Var sg_forward(Tape& t, const SGBlockVars& p, std::size_t coils, Var x) {
  require(t.is_complex(x) && t.shape(x).size() == 3 && t.shape(x)[0] == coils,
          "sg_forward: expected complex [" + std::to_string(coils) + ",h,w] input, got " +
              shape_to_string(t.shape(x)));
  Var h = pack_complex(t, x);
  for (std::size_t l = 0; l < SGBlockParams::kLayers; ++l) {
    h = conv2d(t, h, p.weights[l], p.biases[l]);
    if (l + 1 < SGBlockParams::kLayers) h = relu(t, h);
  }
  return unpack_complex(t, h);
}

ComplexTensor sg_forward(const SGBlockParams& p, const ComplexTensor& x) {
  Tape t(false);
  const SGBlockVars v = bind(t, p, false);
  return t.complex_tensor(sg_forward(t, v, p.coils, t.constant(x)));
}

}  // namespace psfnet::nd
