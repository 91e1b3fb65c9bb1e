#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "psfnet/cascade.hpp"
#include "psfnet/simulate.hpp"

namespace psfnet {

enum class TrainMode { kSupervised, kSelfSupervised };

std::string_view to_string(TrainMode mode);
TrainMode parse_train_mode(std::string_view s);

// Defaults follow the published operating point (Adam with lr 1e-4,
// beta = (0.9, 0.99), 200 epochs, batch 2, K = 5, kappa = 1e-2, w = 9) except
// for the channel count, which is reduced to 16 for CPU-scale runs.
struct TrainConfig {
  TrainMode mode = TrainMode::kSupervised;
  ModelKind model = ModelKind::kPsfnet;
  std::size_t epochs = 200;
  std::size_t batch_size = 2;
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  std::size_t cascades = 5;
  std::size_t channels = 16;
  std::size_t kernel_size = 9;
  double kappa = 1e-2;
  double loss_frac = 0.4;
  bool normalize = true;
  std::size_t threads = 1;
  bool final_dc = false;

  void validate() const;
};

struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::uint64_t step = 0;

  static AdamState zeros_like(const ModelParams& p);
};

// One bias-corrected Adam update of every parameter block in place.
void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state, double lr,
               double beta1, double beta2, double eps);

// ||pred - target||_1 / n + ||pred - target||_2 / sqrt(n).
double hybrid_loss(const ComplexTensor& pred, const ComplexTensor& target);

// Scales k-space and images so that the largest zero-filled coil-image
// magnitude is 1. Returns the applied factor.
double normalize_scan(Scan& scan);

struct HistoryEntry {
  std::size_t epoch = 0;
  std::size_t step = 0;
  double loss = 0.0;
};

struct TrainResult {
  ModelParams params;
  std::vector<HistoryEntry> history;
};

// Invoked after every optimizer step; returning false stops training.
using StepCallback = std::function<bool(const HistoryEntry&, const ModelParams&)>;

TrainResult train_supervised(const std::vector<Scan>& scans, const TrainConfig& cfg,
                             const StepCallback& on_step = {});
TrainResult train_selfsup(const std::vector<Scan>& scans, const TrainConfig& cfg,
                          const StepCallback& on_step = {});
TrainResult train(const std::vector<Scan>& scans, const TrainConfig& cfg,
                  const StepCallback& on_step = {});

// Loss of one scan and its gradient with respect to every parameter block.
// Exposed for gradient checking.
struct LossAndGrad {
  double loss = 0.0;
  ModelParams grad;
};
LossAndGrad scan_loss_and_grad(const ModelParams& params, const Scan& scan, const SSKernel* kernel,
                               const TrainConfig& cfg);
double scan_loss(const ModelParams& params, const Scan& scan, const SSKernel* kernel,
                 const TrainConfig& cfg);

struct InferenceResult {
  ComplexTensor multicoil;  // [z,h,w], in the scan's original intensity units
  ComplexTensor combined;   // [h,w]
  std::size_t kernels_calibrated = 0;
};

// Calibrates the scan's kernel when the model needs one, runs the frozen
// cascade with every acquired sample as the DC set, and coil-combines.
InferenceResult infer(const ModelParams& params, const Scan& scan, const TrainConfig& cfg);

}  // namespace psfnet
