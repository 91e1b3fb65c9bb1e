#include "psfnet/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <thread>

#include "psfnet/fft.hpp"

namespace psfnet {

std::string_view to_string(TrainMode mode) {
  return mode == TrainMode::kSupervised ? "supervised" : "selfsup";
}

TrainMode parse_train_mode(std::string_view s) {
  if (s == "supervised") return TrainMode::kSupervised;
  if (s == "selfsup") return TrainMode::kSelfSupervised;
  throw ConfigError("unknown training mode '" + std::string(s) + "' (expected supervised|selfsup)");
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (!(lr >= 0.0)) throw ConfigError("train: lr must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("train: Adam betas must lie in [0, 1)");
  }
  if (!(adam_eps > 0.0)) throw ConfigError("train: adam_eps must be > 0");
  if (cascades < 1) throw ConfigError("train: cascades must be >= 1");
  if (channels < 1) throw ConfigError("train: channels must be >= 1");
  if (kernel_size % 2 == 0) throw ConfigError("train: kernel_size must be odd");
  if (!(kappa >= 0.0)) throw ConfigError("train: kappa must be >= 0");
  if (!(loss_frac > 0.0 && loss_frac < 1.0)) throw ConfigError("train: loss_frac must lie in (0,1)");
  if (threads < 1) throw ConfigError("train: threads must be >= 1");
}

AdamState AdamState::zeros_like(const ModelParams& p) {
  AdamState s;
  for (auto b : p.blocks()) {
    s.m.emplace_back(b.size(), 0.0);
    s.v.emplace_back(b.size(), 0.0);
  }
  return s;
}

void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state, double lr,
               double beta1, double beta2, double eps) {
  auto pb = params.blocks();
  const auto gb = grads.blocks();
  if (pb.size() != gb.size() || state.m.size() != pb.size() || state.v.size() != pb.size()) {
    throw ShapeError("adam_step: parameter, gradient and state layouts differ");
  }
  state.step += 1;
  const double t = double(state.step);
  const double c1 = 1.0 - std::pow(beta1, t);
  const double c2 = 1.0 - std::pow(beta2, t);
  for (std::size_t b = 0; b < pb.size(); ++b) {
    if (pb[b].size() != gb[b].size() || state.m[b].size() != pb[b].size()) {
      throw ShapeError("adam_step: block size mismatch");
    }
    for (std::size_t i = 0; i < pb[b].size(); ++i) {
      const double g = gb[b][i];
      double& m = state.m[b][i];
      double& v = state.v[b][i];
      m = beta1 * m + (1.0 - beta1) * g;
      v = beta2 * v + (1.0 - beta2) * g * g;
      pb[b][i] -= lr * (m / c1) / (std::sqrt(v / c2) + eps);
    }
  }
}

double hybrid_loss(const ComplexTensor& pred, const ComplexTensor& target) {
  require_same_shape(pred, target, "hybrid_loss");
  if (pred.empty()) throw ConfigError("hybrid_loss: empty tensors");
  double l1 = 0.0;
  double l2 = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const cplx d = pred[i] - target[i];
    l1 += std::abs(d);
    l2 += std::norm(d);
  }
  const double n = double(pred.size());
  return l1 / n + std::sqrt(l2) / std::sqrt(n);
}

double normalize_scan(Scan& scan) {
  const ComplexTensor zf = ifft2c(scan.und_ksp);
  double peak = 0.0;
  for (const cplx& v : zf.storage()) peak = std::max(peak, std::abs(v));
  const double s = peak > 0.0 ? 1.0 / peak : 1.0;
  for (ComplexTensor* t : {&scan.und_ksp, &scan.full_ksp, &scan.truth_img}) {
    for (cplx& v : t->storage()) v *= s;
  }
  return s;
}

namespace {

const MaskTensor& dc_mask_for(const Scan& scan, TrainMode mode) {
  if (mode == TrainMode::kSelfSupervised) {
    if (!scan.mask.split) {
      throw ConfigError("self-supervised training needs a dc/loss split for scan '" + scan.id + "'");
    }
    return scan.mask.split->dc_mask;
  }
  return scan.mask.mask;
}

nd::Var build_loss(nd::Tape& t, const ModelParams& params, const ModelVars& vars, const Scan& scan,
                   const SSKernel* kernel, const TrainConfig& cfg) {
  const MaskTensor& dc = dc_mask_for(scan, cfg.mode);
  const nd::Var out =
      model_forward(t, cfg.model, params, vars, kernel, scan.und_ksp, dc, {cfg.final_dc});
  if (cfg.mode == TrainMode::kSupervised) return nd::hybrid_loss(t, out, scan.truth_img);
  return nd::hybrid_loss(t, nd::fft2c(t, out), scan.und_ksp, &scan.mask.split->loss_mask);
}

}  // namespace

LossAndGrad scan_loss_and_grad(const ModelParams& params, const Scan& scan, const SSKernel* kernel,
                               const TrainConfig& cfg) {
  nd::Tape t(true);
  const ModelVars vars = bind(t, params, true);
  const nd::Var loss = build_loss(t, params, vars, scan, kernel, cfg);
  t.backward(loss);

  LossAndGrad out{t.scalar(loss), zeros_like(params)};
  std::vector<nd::Var> order;
  for (std::size_t l = 0; l < nd::SGBlockParams::kLayers; ++l) {
    order.push_back(vars.sg.weights[l]);
    order.push_back(vars.sg.biases[l]);
  }
  order.push_back(vars.eta);
  order.push_back(vars.gamma);
  auto blocks = out.grad.blocks();
  for (std::size_t b = 0; b < order.size(); ++b) {
    const auto g = std::as_const(t).real_grad(order[b]);
    std::copy(g.begin(), g.end(), blocks[b].begin());
  }
  return out;
}

double scan_loss(const ModelParams& params, const Scan& scan, const SSKernel* kernel,
                 const TrainConfig& cfg) {
  nd::Tape t(false);
  const ModelVars vars = bind(t, params, false);
  return t.scalar(build_loss(t, params, vars, scan, kernel, cfg));
}

TrainResult train(const std::vector<Scan>& scans, const TrainConfig& cfg,
                  const StepCallback& on_step) {
  cfg.validate();
  if (scans.empty()) throw ConfigError("train: no training scans");
  const std::size_t z = scans.front().coils();
  for (const Scan& s : scans) {
    if (s.coils() != z) throw ConfigError("train: all scans must share the coil count");
    if (cfg.mode == TrainMode::kSelfSupervised) {
      validate_split(s.mask);
    } else if (s.truth_img.empty()) {
      throw ConfigError("supervised training needs ground truth for scan '" + s.id + "'");
    }
  }

  std::vector<Scan> work = scans;
  if (cfg.normalize) {
    for (Scan& s : work) normalize_scan(s);
  }
  // Kernels depend only on each scan's calibration data, so they are fitted once.
  std::vector<SSKernel> kernels;
  if (uses_kernel(cfg.model)) {
    for (const Scan& s : work) {
      kernels.push_back(calibrate_kernel(apply_mask(s.und_ksp, dc_mask_for(s, cfg.mode)),
                                         s.mask.calib, cfg.kernel_size, cfg.kappa));
    }
  }

  TrainResult result;
  result.params = init_model(z, cfg.channels, cfg.cascades, cfg.seed);
  AdamState state = AdamState::zeros_like(result.params);
  std::mt19937_64 order_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(work.size());
  std::iota(order.begin(), order.end(), 0);

  std::size_t step = 0;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), order_rng);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t count = std::min(cfg.batch_size, order.size() - start);
      std::vector<LossAndGrad> parts(count);
      auto run = [&](std::size_t j) {
        const std::size_t idx = order[start + j];
        parts[j] = scan_loss_and_grad(result.params, work[idx],
                                      kernels.empty() ? nullptr : &kernels[idx], cfg);
      };
      const std::size_t nthreads = std::min(cfg.threads, count);
      if (nthreads <= 1) {
        for (std::size_t j = 0; j < count; ++j) run(j);
      } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < nthreads; ++w) {
          pool.emplace_back([&, w] {
            for (std::size_t j = w; j < count; j += nthreads) run(j);
          });
        }
        for (auto& th : pool) th.join();
      }

      // Ordered reduction keeps the result independent of the thread count.
      ModelParams grad = zeros_like(result.params);
      double loss = 0.0;
      auto gb = grad.blocks();
      for (const auto& part : parts) {
        loss += part.loss;
        const auto pb = part.grad.blocks();
        for (std::size_t b = 0; b < gb.size(); ++b) {
          for (std::size_t i = 0; i < gb[b].size(); ++i) gb[b][i] += pb[b][i];
        }
      }
      const double inv = 1.0 / double(count);
      for (auto b : gb) {
        for (double& v : b) v *= inv;
      }
      loss *= inv;
      if (!std::isfinite(loss)) throw NumericError("train: loss became non-finite");

      adam_step(result.params, grad, state, cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps);
      ++step;
      result.history.push_back({epoch, step, loss});
      if (on_step && !on_step(result.history.back(), result.params)) return result;
    }
  }
  return result;
}

TrainResult train_supervised(const std::vector<Scan>& scans, const TrainConfig& cfg,
                             const StepCallback& on_step) {
  TrainConfig c = cfg;
  c.mode = TrainMode::kSupervised;
  return train(scans, c, on_step);
}

TrainResult train_selfsup(const std::vector<Scan>& scans, const TrainConfig& cfg,
                          const StepCallback& on_step) {
  TrainConfig c = cfg;
  c.mode = TrainMode::kSelfSupervised;
  return train(scans, c, on_step);
}

InferenceResult infer(const ModelParams& params, const Scan& scan, const TrainConfig& cfg) {
  Scan work = scan;
  const double s = cfg.normalize ? normalize_scan(work) : 1.0;
  InferenceResult res;
  std::optional<SSKernel> kernel;
  if (uses_kernel(cfg.model)) {
    kernel = calibrate_kernel(work.und_ksp, work.mask.calib, cfg.kernel_size, cfg.kappa);
    res.kernels_calibrated = 1;
  }
  res.multicoil = model_forward(cfg.model, params, kernel ? &*kernel : nullptr, work.und_ksp,
                                work.mask.mask, {cfg.final_dc});
  const double inv = 1.0 / s;
  for (cplx& v : res.multicoil.storage()) v *= inv;
  res.combined = coil_combine(res.multicoil, scan.sens_maps);
  return res;
}

}  // namespace psfnet
