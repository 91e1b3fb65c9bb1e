#pragma once

// Reverse-mode differentiation over the handful of primitives the
// reconstruction networks need. Values live on a Tape; every primitive records
// a closure that pushes its output gradient back to its inputs. Complex values
// carry gradients as dL/dRe + i dL/dIm, so fixed complex-linear operators
// backpropagate through their adjoints.

#include <array>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <vector>

#include "psfnet/calibration.hpp"
#include "psfnet/tensor.hpp"

namespace psfnet::nd {

struct Var {
  static constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
  std::size_t id = kNone;
  bool valid() const noexcept { return id != kNone; }
};

class Tape {
 public:
  // With record == false no backward closures are kept; used for inference.
  explicit Tape(bool record = true) : record_(record) {}

  Var constant(ComplexTensor value);
  Var constant(RealTensor value);
  // Trainable leaf; its gradient is available after backward().
  Var parameter(RealTensor value);

  bool is_complex(Var v) const { return node(v).is_complex; }
  const Shape& shape(Var v) const { return node(v).shape; }
  bool requires_grad(Var v) const { return node(v).requires_grad; }

  std::span<const double> real(Var v) const;
  std::span<const cplx> complex(Var v) const;
  std::span<double> real_grad(Var v);
  std::span<cplx> complex_grad(Var v);
  std::span<const double> real_grad(Var v) const;
  std::span<const cplx> complex_grad(Var v) const;

  RealTensor real_tensor(Var v) const;
  ComplexTensor complex_tensor(Var v) const;
  double scalar(Var v) const;

  // Seeds d(loss)/d(loss) = 1 and sweeps the tape in reverse.
  void backward(Var loss);

  std::size_t size() const noexcept { return nodes_.size(); }
  bool recording() const noexcept { return record_; }

  // Primitive registration, used by the op functions below.
  using BackwardFn = std::function<void(Tape&)>;
  Var push_real(RealTensor value, bool requires_grad);
  Var push_complex(ComplexTensor value, bool requires_grad);
  void set_backward(Var v, BackwardFn fn);

 private:
  struct Node {
    Shape shape;
    bool is_complex = false;
    bool requires_grad = false;
    std::vector<double> rv, rg;
    std::vector<cplx> cv, cg;
    BackwardFn backward;
  };
  const Node& node(Var v) const;
  Node& node(Var v);
  void ensure_grad(Node& n);

  bool record_;
  bool swept_ = false;
  std::vector<Node> nodes_;
};

// Real 3x3 same-padded convolution: x [Cin,h,w], weight [Cout,Cin,3,3],
// bias [Cout].
Var conv2d(Tape& t, Var x, Var weight, Var bias);
Var relu(Tape& t, Var x);
Var add(Tape& t, Var a, Var b);
// Complex x times element `index` of the real vector `scalars`.
Var scale(Tape& t, Var scalars, std::size_t index, Var x);
// Complex [z,h,w] -> real [2z,h,w] with channel 2c = Re, 2c+1 = Im.
Var pack_complex(Tape& t, Var x);
Var unpack_complex(Tape& t, Var x);
Var fft2c(Tape& t, Var x);
Var ifft2c(Tape& t, Var x);
// Fixed scan-specific operator; no gradient flows into the kernel.
Var ss_apply(Tape& t, const SSKernel& kernel, Var x);
// `und_ksp` and `dc_mask` must outlive the tape.
Var dc_project(Tape& t, Var x, const ComplexTensor& und_ksp, const MaskTensor& dc_mask,
               double lambda);
// Sum of squared magnitudes.
Var squared_norm(Tape& t, Var x);
// Sum of real parts (complex) or of entries (real).
Var real_sum(Tape& t, Var x);
// ||pred - target||_1 / n + ||pred - target||_2 / sqrt(n) over the selected
// entries; with a [h,w] `plane_mask` only entries where it is 1 count, in every
// coil. `target` and `plane_mask` must outlive the tape.
Var hybrid_loss(Tape& t, Var pred, const ComplexTensor& target,
                const MaskTensor* plane_mask = nullptr);

// Scan-general CNN: input conv 2z->C, four hidden convs C->C (all ReLU) and an
// output conv C->2z with identity activation. Kernels are 3x3 throughout.
struct SGBlockParams {
  static constexpr std::size_t kLayers = 6;
  std::size_t coils = 0;
  std::size_t channels = 0;
  std::array<RealTensor, kLayers> weights;
  std::array<RealTensor, kLayers> biases;

  std::size_t layer_in(std::size_t layer) const;
  std::size_t layer_out(std::size_t layer) const;
  std::size_t parameter_count() const;

  bool operator==(const SGBlockParams&) const = default;
};

// Closed-form parameter count for (z, C).
std::size_t sg_parameter_count(std::size_t coils, std::size_t channels);

// He-style fan-in uniform weights (E[w^2] = 2/fan_in), zero biases.
SGBlockParams init_params(std::size_t coils, std::size_t channels, std::uint64_t seed);

// All weights and biases zero.
SGBlockParams zero_params(std::size_t coils, std::size_t channels);

// Exact identity map with 4z channels: the input layer splits every real
// channel into its positive and negative parts, hidden layers carry them
// through, and the output layer recombines pos - neg.
SGBlockParams identity_params(std::size_t coils);

struct SGBlockVars {
  std::array<Var, SGBlockParams::kLayers> weights;
  std::array<Var, SGBlockParams::kLayers> biases;
};

// Registers the block parameters on the tape (as trainable leaves when
// `trainable`, constants otherwise).
SGBlockVars bind(Tape& t, const SGBlockParams& p, bool trainable);

Var sg_forward(Tape& t, const SGBlockVars& p, std::size_t coils, Var x);

// Value-only convenience wrapper.
ComplexTensor sg_forward(const SGBlockParams& p, const ComplexTensor& x);

}  // namespace psfnet::nd
