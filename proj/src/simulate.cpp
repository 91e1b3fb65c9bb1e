#include "psfnet/simulate.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "psfnet/fft.hpp"

namespace psfnet {

bool Ellipse::contains(double u, double v) const {
  const double t = angle_deg * std::numbers::pi / 180.0;
  const double du = u - cu;
  const double dv = v - cv;
  const double ru = du * std::cos(t) + dv * std::sin(t);
  const double rv = -du * std::sin(t) + dv * std::cos(t);
  return (ru * ru) / (au * au) + (rv * rv) / (av * av) <= 1.0;
}

void PhantomConfig::validate() const {
  if (coils < 1) throw ConfigError("phantom: coils must be >= 1");
  if (h < 2 || w < 2) throw ConfigError("phantom: grid must be at least 2x2");
  if (noise_sigma < 0.0) throw ConfigError("phantom: noise_sigma must be >= 0");
  for (const auto& e : ellipses) {
    if (!(e.au > 0.0 && e.av > 0.0)) throw ConfigError("phantom: ellipse axes must be positive");
  }
}

std::vector<Ellipse> shepp_logan_ellipses() {
  // (cu, cv, au, av, angle, intensity)
  return {
      {0.0, 0.0, 0.69, 0.92, 0.0, 1.0},
      {0.0, -0.0184, 0.6624, 0.874, 0.0, -0.8},
      {0.22, 0.0, 0.11, 0.31, -18.0, -0.2},
      {-0.22, 0.0, 0.16, 0.41, 18.0, -0.2},
      {0.0, 0.35, 0.21, 0.25, 0.0, 0.1},
      {0.0, 0.1, 0.046, 0.046, 0.0, 0.1},
      {0.0, -0.1, 0.046, 0.046, 0.0, 0.1},
      {-0.08, -0.605, 0.046, 0.023, 0.0, 0.1},
      {0.0, -0.606, 0.023, 0.023, 0.0, 0.1},
      {0.06, -0.605, 0.023, 0.046, 0.0, 0.1},
  };
}

std::vector<Ellipse> random_phantom_ellipses(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto uniform = [&](double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
  };
  const double scale = uniform(0.85, 1.0);
  const double rot = uniform(-10.0, 10.0);
  const double shift_u = uniform(-0.05, 0.05);
  const double shift_v = uniform(-0.05, 0.05);
  const double rad = rot * std::numbers::pi / 180.0;

  std::vector<Ellipse> out = shepp_logan_ellipses();
  for (std::size_t i = 0; i < out.size(); ++i) {
    Ellipse& e = out[i];
    if (i >= 2) {
      e.cu += uniform(-0.03, 0.03);
      e.cv += uniform(-0.03, 0.03);
      e.au *= uniform(0.9, 1.1);
      e.av *= uniform(0.9, 1.1);
      e.intensity *= uniform(0.8, 1.2);
    }
    const double cu = e.cu * scale;
    const double cv = e.cv * scale;
    e.cu = cu * std::cos(rad) - cv * std::sin(rad) + shift_u;
    e.cv = cu * std::sin(rad) + cv * std::cos(rad) + shift_v;
    e.au *= scale;
    e.av *= scale;
    e.angle_deg += rot;
  }
  const int extra = std::uniform_int_distribution<int>(3, 5)(rng);
  for (int k = 0; k < extra; ++k) {
    const double r = uniform(0.0, 0.45) * scale;
    const double phi = uniform(0.0, 2.0 * std::numbers::pi);
    Ellipse e;
    e.cu = r * std::cos(phi) + shift_u;
    e.cv = r * std::sin(phi) + shift_v;
    e.au = uniform(0.03, 0.12) * scale;
    e.av = uniform(0.03, 0.12) * scale;
    e.angle_deg = uniform(0.0, 180.0);
    e.intensity = uniform(0.05, 0.3) * (uniform(0.0, 1.0) < 0.3 ? -1.0 : 1.0);
    out.push_back(e);
  }
  return out;
}

double pixel_u(std::size_t x, std::size_t w) {
  const double half = double(w / 2);
  return (double(x) - half) / half;
}

double pixel_v(std::size_t y, std::size_t h) {
  const double half = double(h / 2);
  return (half - double(y)) / half;
}

ComplexTensor make_phantom(const PhantomConfig& cfg) {
  cfg.validate();
  ComplexTensor img({cfg.h, cfg.w}, cplx{0.0, 0.0});
  for (std::size_t y = 0; y < cfg.h; ++y) {
    const double v = pixel_v(y, cfg.h);
    for (std::size_t x = 0; x < cfg.w; ++x) {
      const double u = pixel_u(x, cfg.w);
      double value = 0.0;
      for (const auto& e : cfg.ellipses) {
        if (e.contains(u, v)) value += e.intensity;
      }
      img.at(y, x) = value;
    }
  }
  return img;
}

ComplexTensor make_sens_maps(std::size_t h, std::size_t w, std::size_t coils,
                             std::uint64_t seed) {
  if (coils < 1) throw ConfigError("sensitivity maps: coils must be >= 1");
  std::mt19937_64 rng(seed);
  auto uniform = [&](double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
  };
  constexpr double kLobeRadius = 1.2;
  constexpr double kLobeWidth = 0.9;

  struct Profile {
    double cu, cv, slope_u, slope_v, offset;
  };
  std::vector<Profile> prof(coils);
  for (std::size_t c = 0; c < coils; ++c) {
    const double ang = 2.0 * std::numbers::pi * double(c) / double(coils) + uniform(-0.2, 0.2);
    prof[c] = {kLobeRadius * std::cos(ang), kLobeRadius * std::sin(ang), uniform(-0.5, 0.5),
               uniform(-0.5, 0.5), uniform(0.0, 2.0 * std::numbers::pi)};
  }

  ComplexTensor maps({coils, h, w});
  std::vector<double> mag(coils);
  for (std::size_t y = 0; y < h; ++y) {
    const double v = pixel_v(y, h);
    for (std::size_t x = 0; x < w; ++x) {
      const double u = pixel_u(x, w);
      double rss = 0.0;
      for (std::size_t c = 0; c < coils; ++c) {
        const double du = u - prof[c].cu;
        const double dv = v - prof[c].cv;
        mag[c] = std::exp(-(du * du + dv * dv) / (2.0 * kLobeWidth * kLobeWidth));
        rss += mag[c] * mag[c];
      }
      rss = std::sqrt(rss);
      for (std::size_t c = 0; c < coils; ++c) {
        const double phase =
            std::numbers::pi * (prof[c].slope_u * u + prof[c].slope_v * v) + prof[c].offset;
        maps.at(c, y, x) = std::polar(mag[c] / rss, phase);
      }
    }
  }
  return maps;
}

ComplexTensor apply_mask(const ComplexTensor& ksp, const MaskTensor& mask) {
  const std::size_t plane = mask.size();
  if (ksp.ndim() < 2 || ksp.size() % plane != 0 ||
      ksp.dim(ksp.ndim() - 1) != mask.dim(1) || ksp.dim(ksp.ndim() - 2) != mask.dim(0)) {
    throw ShapeError("apply_mask: k-space " + shape_to_string(ksp.shape()) +
                     " incompatible with mask " + shape_to_string(mask.shape()));
  }
  ComplexTensor out(ksp.shape(), cplx{0.0, 0.0});
  for (std::size_t i = 0; i < ksp.size(); ++i) {
    if (mask[i % plane]) out[i] = ksp[i];
  }
  return out;
}

Scan simulate_scan(const ComplexTensor& phantom, const ComplexTensor& sens_maps,
                   const SamplingMask& mask, double noise_sigma, std::uint64_t seed) {
  if (phantom.ndim() != 2 || sens_maps.ndim() != 3 || sens_maps.dim(1) != phantom.dim(0) ||
      sens_maps.dim(2) != phantom.dim(1)) {
    throw ShapeError("simulate_scan: phantom " + shape_to_string(phantom.shape()) +
                     " and maps " + shape_to_string(sens_maps.shape()) + " disagree");
  }
  require_same_shape(mask.mask, phantom, "simulate_scan mask");
  if (noise_sigma < 0.0) throw ConfigError("simulate_scan: noise_sigma must be >= 0");

  const std::size_t z = sens_maps.dim(0);
  const std::size_t plane = phantom.size();
  Scan scan;
  scan.sens_maps = sens_maps;
  scan.truth_img = ComplexTensor(sens_maps.shape());
  for (std::size_t c = 0; c < z; ++c) {
    for (std::size_t i = 0; i < plane; ++i) {
      scan.truth_img[c * plane + i] = sens_maps[c * plane + i] * phantom[i];
    }
  }
  scan.full_ksp = fft2c(scan.truth_img);
  if (noise_sigma > 0.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, noise_sigma);
    for (auto& v : scan.full_ksp.storage()) {
      const double re = noise(rng);
      const double im = noise(rng);
      v += cplx{re, im};
    }
  }
  scan.mask = mask;
  scan.und_ksp = apply_mask(scan.full_ksp, mask.mask);
  return scan;
}

Scan remask_scan(Scan scan, SamplingMask mask) {
  require_same_shape(mask.mask.shape(), Shape{scan.height(), scan.width()}, "remask_scan");
  scan.mask = std::move(mask);
  scan.und_ksp = apply_mask(scan.full_ksp, scan.mask.mask);
  return scan;
}

}  // namespace psfnet
