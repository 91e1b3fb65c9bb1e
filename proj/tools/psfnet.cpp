// psfnet: simulate phantom datasets, build masks, train, reconstruct and evaluate.
#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <thread>

#include "psfnet/calibration.hpp"
#include "psfnet/config.hpp"
#include "psfnet/fft.hpp"
#include "psfnet/io.hpp"
#include "psfnet/metrics.hpp"
#include "psfnet/simd/kernels.hpp"
#include "psfnet/simulate.hpp"
#include "psfnet/training.hpp"

namespace fs = std::filesystem;
using namespace psfnet;

namespace {

struct Globals {
  std::string config_path;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string out;
  std::size_t threads = 1;
};

RunConfig load_config(const Globals& g) {
  RunConfig cfg = g.config_path.empty() ? RunConfig() : RunConfig::load(g.config_path);
  if (g.seed_set) cfg.override_seed(g.seed);
  return cfg;
}

fs::path require_out(const Globals& g) {
  if (g.out.empty()) throw ConfigError("--out is required for this command");
  return g.out;
}

std::string scan_id(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "scan%03zu", i);
  return buf;
}

SamplingMask mask_for(const RunConfig& cfg, std::size_t h, std::size_t w, std::size_t index) {
  const std::uint64_t seed = cfg.get_uint("mask", "seed") + index;
  SamplingMask m = make_mask(h, w, cfg.get_double("mask", "accel"),
                             parse_mask_pattern(cfg.get("mask", "pattern")),
                             cfg.get_uint("mask", "calib"), seed);
  if (cfg.get_bool("mask", "split")) {
    m = split_for_selfsup(m, cfg.get_double("mask", "loss_frac"), seed ^ 0x5bd1e995ULL);
  }
  return m;
}

int cmd_simulate(const Globals& g) {
  const RunConfig cfg = load_config(g);
  const fs::path out = require_out(g);
  const std::size_t n = cfg.get_uint("simulate", "n_scans");
  if (n == 0) throw ConfigError("[simulate] n_scans must be >= 1");
  const std::uint64_t base = cfg.get_uint("simulate", "seed");
  const bool random = cfg.get("simulate", "phantom") == "random";

  std::vector<Scan> scans;
  for (std::size_t i = 0; i < n; ++i) {
    PhantomConfig pc;
    pc.h = cfg.get_uint("simulate", "height");
    pc.w = cfg.get_uint("simulate", "width");
    pc.coils = cfg.get_uint("simulate", "coils");
    pc.noise_sigma = cfg.get_double("simulate", "noise_sigma");
    pc.seed = base + i;
    pc.ellipses = random ? random_phantom_ellipses(pc.seed) : shepp_logan_ellipses();
    pc.validate();
    const ComplexTensor phantom = make_phantom(pc);
    const ComplexTensor maps = make_sens_maps(pc.h, pc.w, pc.coils, pc.seed + 7919);
    Scan s = simulate_scan(phantom, maps, mask_for(cfg, pc.h, pc.w, i), pc.noise_sigma,
                           pc.seed + 104729);
    s.id = scan_id(i);
    scans.push_back(std::move(s));
  }
  io::write_dataset(out, scans);
  io::write_text(out / "config.txt", cfg.to_string());
  std::cout << "wrote " << scans.size() << " scans to " << out.string() << "\n";
  return 0;
}

int cmd_mask(const Globals& g, const std::string& data) {
  const RunConfig cfg = load_config(g);
  const fs::path out = require_out(g);
  std::vector<Scan> scans = io::read_dataset(data);
  for (std::size_t i = 0; i < scans.size(); ++i) {
    SamplingMask m = mask_for(cfg, scans[i].height(), scans[i].width(), i);
    scans[i] = remask_scan(std::move(scans[i]), std::move(m));
  }
  io::write_dataset(out, scans);
  double acquired = 0.0;
  for (const Scan& s : scans) acquired += double(s.mask.acquired());
  const double total = double(scans.size() * scans.front().height() * scans.front().width());
  std::cout << "remasked " << scans.size() << " scans, mean acceleration "
            << format_double(total / acquired) << "\n";
  return 0;
}

int cmd_train(const Globals& g, const std::string& data) {
  const RunConfig cfg = load_config(g);
  const fs::path out = require_out(g);
  TrainConfig tc = cfg.train_config();
  tc.threads = g.threads;
  const std::vector<Scan> scans = io::read_dataset(data);
  if (tc.mode == TrainMode::kSelfSupervised) {
    for (const Scan& s : scans) {
      if (!s.mask.split) {
        throw ConfigError("mode=selfsup needs masks with a dc/loss split; scan '" + s.id +
                          "' has none (re-run 'mask' with [mask] split = true)");
      }
    }
  }
  const TrainResult res = train(scans, tc);
  io::CheckpointMeta meta{tc.model, tc.seed, tc.kernel_size, tc.kappa, tc.final_dc};
  io::write_checkpoint(out, res.params, meta);
  io::write_text(out / "history.csv", io::history_csv(res.history));
  std::cout << "trained " << to_string(tc.model) << " (" << to_string(tc.mode) << ") for "
            << res.history.size() << " steps, final loss "
            << format_double(res.history.back().loss) << "\n";
  return 0;
}

RealTensor reconstruct_one(const std::string& method, const Scan& scan, const RunConfig& cfg,
                           const ModelParams* params, const io::CheckpointMeta* meta) {
  const std::size_t w = cfg.get_uint("model", "kernel_size");
  const double kappa = cfg.get_double("model", "kappa");
  if (method == "zf") return magnitude(coil_combine(ifft2c(scan.und_ksp), scan.sens_maps));
  if (method == "spirit") {
    const SSKernel k = calibrate_kernel(scan.und_ksp, scan.mask.calib, w, kappa);
    const ComplexTensor x = spirit_reconstruct(scan.und_ksp, scan.mask.mask, k,
                                               cfg.get_uint("model", "spirit_iters"));
    return magnitude(coil_combine(x, scan.sens_maps));
  }
  TrainConfig tc = cfg.train_config();
  tc.model = meta->model;
  tc.kernel_size = w;
  tc.kappa = kappa;
  tc.final_dc = meta->final_dc;
  return magnitude(infer(*params, scan, tc).combined);
}

int cmd_reconstruct(const Globals& g, const std::string& data, const std::string& method,
                    const std::string& ckpt) {
  const RunConfig cfg = load_config(g);
  const fs::path out = require_out(g);
  const bool learned = method == "modl" || method == "psfnet" || method == "psfnet_serial";
  if (!learned && method != "zf" && method != "spirit") {
    throw ConfigError("unknown method '" + method + "' (zf|spirit|modl|psfnet|psfnet_serial)");
  }
  ModelParams params;
  io::CheckpointMeta meta;
  if (learned) {
    if (ckpt.empty()) throw ConfigError("method " + method + " needs --ckpt");
    params = io::read_checkpoint(ckpt, &meta);
    if (std::string(to_string(meta.model)) != method) {
      throw ConfigError("checkpoint holds a " + std::string(to_string(meta.model)) +
                        " model, not " + method);
    }
  }
  const std::vector<Scan> scans = io::read_dataset(data);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw IoError("cannot create '" + out.string() + "': " + ec.message());

  std::vector<RealTensor> images(scans.size());
  std::vector<double> seconds(scans.size(), 0.0);
  auto run = [&](std::size_t i) {
    const auto t0 = std::chrono::steady_clock::now();
    images[i] = reconstruct_one(method, scans[i], cfg, learned ? &params : nullptr, &meta);
    seconds[i] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };
  const std::size_t nthreads = std::min<std::size_t>(std::max<std::size_t>(g.threads, 1), scans.size());
  if (nthreads <= 1) {
    for (std::size_t i = 0; i < scans.size(); ++i) run(i);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(nthreads);
    for (std::size_t t = 0; t < nthreads; ++t) {
      pool.emplace_back([&, t] {
        try {
          for (std::size_t i = t; i < scans.size(); i += nthreads) run(i);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  std::ostringstream timing;
  timing << "scan,method,seconds\n";
  double total = 0.0;
  for (std::size_t i = 0; i < scans.size(); ++i) {
    if (!all_finite(images[i])) throw NumericError("reconstruction of " + scans[i].id + " is not finite");
    const std::string stem = scans[i].id + "_" + method;
    io::write_cxt(out / (stem + ".cxt"), images[i]);
    io::write_pgm(out / (stem + ".pgm"), images[i]);
    timing << scans[i].id << "," << method << "," << format_double(seconds[i]) << "\n";
    total += seconds[i];
  }
  io::write_text(out / ("timing_" + method + ".csv"), timing.str());
  std::cout << "timing method=" << method << " scans=" << scans.size()
            << " seconds=" << format_double(total) << "\n";
  return 0;
}

int cmd_evaluate(const Globals& g, const std::string& data, const std::string& recon,
                 const std::string& methods_arg) {
  const RunConfig cfg = load_config(g);
  const fs::path out = require_out(g);
  const std::vector<std::string> methods =
      methods_arg.empty() ? cfg.get_list("eval", "methods") : io::split_list(methods_arg);
  if (methods.empty()) throw ConfigError("no methods to evaluate");
  const std::vector<Scan> scans = io::read_dataset(data);

  EvalReport report;
  std::ostringstream per_scan;
  per_scan << "scan,method,psnr,ssim\n";
  for (const std::string& m : methods) {
    MethodScores ms;
    ms.method = m;
    for (const Scan& s : scans) {
      const fs::path file = fs::path(recon) / (s.id + "_" + m + ".cxt");
      if (!fs::exists(file)) {
        throw ConfigError("no " + m + " reconstruction for scan '" + s.id + "' in " + recon);
      }
      const RealTensor img = io::read_cxt_real(file);
      const RealTensor ref = magnitude(coil_combine(s.truth_img, s.sens_maps));
      if (img.shape() != ref.shape()) {
        throw ConfigError("reconstruction " + file.string() + " does not match scan '" + s.id + "'");
      }
      ms.scan_ids.push_back(s.id);
      ms.psnr.push_back(psnr(img, ref));
      ms.ssim.push_back(ssim(img, ref));
      per_scan << s.id << "," << m << "," << format_double(ms.psnr.back()) << ","
               << format_double(ms.ssim.back()) << "\n";
    }
    report.methods.push_back(std::move(ms));
  }
  compute_pairwise(report);

  std::ostringstream summary, pairwise, text;
  summary << "method,n,psnr_mean,psnr_se,ssim_mean,ssim_se\n";
  text << "method          n    PSNR (dB)          SSIM\n";
  for (const MethodScores& ms : report.methods) {
    const Summary p = summarize(ms.psnr);
    const Summary s = summarize(ms.ssim);
    summary << ms.method << "," << ms.psnr.size() << "," << format_double(p.mean) << ","
            << format_double(p.std_error) << "," << format_double(s.mean) << ","
            << format_double(s.std_error) << "\n";
    char line[160];
    std::snprintf(line, sizeof line, "%-14s %3zu  %7.3f +- %-6.3f  %6.4f +- %-6.4f\n",
                  ms.method.c_str(), ms.psnr.size(), p.mean, p.std_error, s.mean, s.std_error);
    text << line;
  }
  pairwise << "method_a,method_b,p_psnr,p_ssim\n";
  if (!report.pairwise.empty()) text << "\nWilcoxon signed-rank p-values\n";
  for (const PairwiseTest& t : report.pairwise) {
    pairwise << t.method_a << "," << t.method_b << "," << format_double(t.p_psnr) << ","
             << format_double(t.p_ssim) << "\n";
    char line[160];
    std::snprintf(line, sizeof line, "%-14s vs %-14s PSNR p=%.4g  SSIM p=%.4g\n",
                  t.method_a.c_str(), t.method_b.c_str(), t.p_psnr, t.p_ssim);
    text << line;
  }

  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw IoError("cannot create '" + out.string() + "': " + ec.message());
  io::write_text(out / "metrics.csv", per_scan.str());
  io::write_text(out / "summary.csv", summary.str());
  io::write_text(out / "pairwise.csv", pairwise.str());
  io::write_text(out / "report.txt", text.str());
  std::cout << text.str();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PSFNet multi-coil MRI reconstruction toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config_path, "key=value configuration file");
  app.add_option("--seed", g.seed, "override every seed in the configuration")
      ->each([&](const std::string&) { g.seed_set = true; });
  app.add_option("--out", g.out, "output directory");
  app.add_option("--threads", g.threads, "worker threads")->check(CLI::PositiveNumber);

  std::string data, recon, method, ckpt, methods;
  auto* sim = app.add_subcommand("simulate", "generate a phantom dataset");
  auto* mask = app.add_subcommand("mask", "resample the masks of a dataset");
  mask->add_option("--data", data, "input dataset")->required();
  auto* tr = app.add_subcommand("train", "train a network and write a checkpoint");
  tr->add_option("--data", data, "training dataset")->required();
  auto* rec = app.add_subcommand("reconstruct", "reconstruct every scan of a dataset");
  rec->add_option("--data", data, "dataset")->required();
  rec->add_option("--method", method, "zf|spirit|modl|psfnet|psfnet_serial")->required();
  rec->add_option("--ckpt", ckpt, "checkpoint directory (learned methods)");
  auto* ev = app.add_subcommand("evaluate", "score reconstructions against ground truth");
  ev->add_option("--data", data, "dataset with ground truth")->required();
  ev->add_option("--recon", recon, "directory of reconstructions")->required();
  ev->add_option("--methods", methods, "comma-separated methods (default: [eval] methods)");
  auto* info = app.add_subcommand("config", "print the effective configuration");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : int(ExitCode::kConfig);
  }

  try {
    if (*sim) return cmd_simulate(g);
    if (*mask) return cmd_mask(g, data);
    if (*tr) return cmd_train(g, data);
    if (*rec) return cmd_reconstruct(g, data, method, ckpt);
    if (*ev) return cmd_evaluate(g, data, recon, methods);
    if (*info) {
      std::cout << load_config(g).to_string() << "# simd: " << simd::active_kernels().name << "\n";
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "psfnet: " << e.what() << "\n";
    return int(e.exit_code());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "psfnet: " << e.what() << "\n";
    return int(ExitCode::kIo);
  } catch (const std::exception& e) {
    std::cerr << "psfnet: " << e.what() << "\n";
    return int(ExitCode::kNumeric);
  }
  return 0;
}
