#include "psfnet/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace psfnet {

std::string_view to_string(MaskPattern p) {
  return p == MaskPattern::kVariable ? "variable" : "uniform";
}

MaskPattern parse_mask_pattern(std::string_view s) {
  if (s == "variable") return MaskPattern::kVariable;
  if (s == "uniform") return MaskPattern::kUniform;
  throw ConfigError("unknown mask pattern '" + std::string(s) + "' (expected variable|uniform)");
}

CalibWindow centered_calib_window(std::size_t h, std::size_t w, std::size_t calib_size) {
  if (calib_size > h || calib_size > w) {
    throw ConfigError("calibration window " + std::to_string(calib_size) + " exceeds grid " +
                      std::to_string(h) + "x" + std::to_string(w));
  }
  return {h / 2 - calib_size / 2, w / 2 - calib_size / 2, calib_size, calib_size};
}

std::size_t SamplingMask::acquired() const {
  return static_cast<std::size_t>(std::count(mask.storage().begin(), mask.storage().end(), 1));
}

double SamplingMask::achieved_acceleration() const {
  const std::size_t n = acquired();
  return n == 0 ? std::numeric_limits<double>::infinity() : double(mask.size()) / double(n);
}

namespace {

// Unnormalized bivariate normal with per-axis standard deviation spread*extent.
double gaussian_weight(std::size_t y, std::size_t x, std::size_t h, std::size_t w, double spread) {
  const double dy = (double(y) - double(h / 2)) / (spread * double(h));
  const double dx = (double(x) - double(w / 2)) / (spread * double(w));
  return std::exp(-0.5 * (dy * dy + dx * dx));
}

}  // namespace

RealTensor sampling_density(std::size_t h, std::size_t w, double accel, MaskPattern pattern,
                            std::size_t calib_size) {
  if (!(accel >= 1.0) || !std::isfinite(accel)) {
    throw ConfigError("acceleration must be a finite value >= 1");
  }
  const CalibWindow calib = centered_calib_window(h, w, calib_size);
  RealTensor density({h, w}, 0.0);
  if (accel == 1.0) {
    density.fill(1.0);
    return density;
  }
  const double total = double(h * w);
  const double budget = total / accel;
  const double forced = double(calib.count());
  if (forced > budget) {
    throw ConfigError("calibration window (" + std::to_string(calib.count()) +
                      " samples) exceeds the sampling budget at R=" + std::to_string(accel));
  }
  const double remaining = budget - forced;
  const double outside = total - forced;

  auto fill = [&](double spread) {
    double expected = 0.0;
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        double p = 1.0;
        if (!calib.contains(y, x)) {
          p = pattern == MaskPattern::kUniform ? remaining / outside
                                               : gaussian_weight(y, x, h, w, spread);
          expected += p;
        }
        density.at(y, x) = p;
      }
    }
    return expected;
  };

  if (pattern == MaskPattern::kUniform || outside == 0.0) {
    fill(1.0);
    return density;
  }
  // Expected count grows monotonically with the spread.
  double lo = 1e-6;
  double hi = 1e3;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (fill(mid) < remaining) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (hi - lo <= 1e-12 * hi) break;
  }
  fill(0.5 * (lo + hi));
  return density;
}

SamplingMask make_mask(std::size_t h, std::size_t w, double accel, MaskPattern pattern,
                       std::size_t calib_size, std::uint64_t seed) {
  const RealTensor density = sampling_density(h, w, accel, pattern, calib_size);
  SamplingMask out;
  out.mask = MaskTensor({h, w}, 0);
  out.calib = centered_calib_window(h, w, calib_size);
  out.accel_target = accel;
  out.pattern = pattern;
  out.seed = seed;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (std::size_t i = 0; i < density.size(); ++i) {
    const double u = unif(rng);
    out.mask[i] = (density[i] >= 1.0 || u < density[i]) ? 1 : 0;
  }
  return out;
}

SamplingMask split_for_selfsup(const SamplingMask& mask, double loss_frac, std::uint64_t seed) {
  if (!(loss_frac > 0.0 && loss_frac < 1.0)) {
    throw ConfigError("loss_frac must lie in (0, 1)");
  }
  if (mask.split) throw ConfigError("mask already carries a self-supervision split");
  const std::size_t h = mask.height();
  const std::size_t w = mask.width();

  std::vector<std::size_t> candidates;
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      if (mask.mask.at(y, x) && !mask.calib.contains(y, x)) candidates.push_back(y * w + x);
    }
  }
  std::size_t n_loss = static_cast<std::size_t>(std::llround(loss_frac * double(candidates.size())));
  if (!candidates.empty()) n_loss = std::clamp<std::size_t>(n_loss, 1, candidates.size());

  // Partial Fisher-Yates: the first n_loss candidates go to the loss set.
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < n_loss; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, candidates.size() - 1);
    std::swap(candidates[i], candidates[pick(rng)]);
  }

  SamplingMask out = mask;
  MaskSplit split{mask.mask, MaskTensor({h, w}, 0)};
  for (std::size_t i = 0; i < n_loss; ++i) {
    split.dc_mask[candidates[i]] = 0;
    split.loss_mask[candidates[i]] = 1;
  }
  out.split = std::move(split);
  return out;
}

void validate_split(const SamplingMask& mask) {
  if (!mask.split) throw ConfigError("mask has no self-supervision split");
  const auto& dc = mask.split->dc_mask;
  const auto& loss = mask.split->loss_mask;
  require_same_shape(dc, mask.mask, "split dc_mask");
  require_same_shape(loss, mask.mask, "split loss_mask");
  for (std::size_t i = 0; i < mask.mask.size(); ++i) {
    if ((dc[i] && loss[i]) || (bool(dc[i] || loss[i]) != bool(mask.mask[i]))) {
      throw ConfigError("self-supervision split is not a disjoint cover of the acquired samples");
    }
  }
}

}  // namespace psfnet
