#include <doctest.h>

#include <random>

#include "psfnet/calibration.hpp"
#include "psfnet/cascade.hpp"
#include "psfnet/fft.hpp"
#include "psfnet/metrics.hpp"
#include "psfnet/simulate.hpp"
#include "support.hpp"

using namespace psfnet;

namespace {

// Triple-loop k-space correlation with zero padding.
ComplexTensor brute_correlate(const ComplexTensor& k, const ComplexTensor& ksp) {
  const std::size_t z = ksp.dim(0), h = ksp.dim(1), w = ksp.dim(2), kw = k.dim(2);
  const long r = long(kw / 2);
  ComplexTensor out(ksp.shape(), cplx{0.0, 0.0});
  for (std::size_t o = 0; o < z; ++o)
    for (long y = 0; y < long(h); ++y)
      for (long x = 0; x < long(w); ++x) {
        cplx acc{0.0, 0.0};
        for (std::size_t i = 0; i < z; ++i)
          for (long ty = 0; ty < long(kw); ++ty)
            for (long tx = 0; tx < long(kw); ++tx) {
              const long yy = y + ty - r, xx = x + tx - r;
              if (yy < 0 || xx < 0 || yy >= long(h) || xx >= long(w)) continue;
              acc += k[((o * z + i) * kw + ty) * kw + tx] * ksp.at(i, yy, xx);
            }
        out.at(o, y, x) = acc;
      }
  return out;
}

SSKernel random_kernel(std::size_t z, std::size_t w, std::uint64_t seed) {
  SSKernel k;
  k.kernel_size = w;
  k.kappa = 0.0;
  k.weights = test::random_complex({z, z, w, w}, seed);
  return k;
}

Scan phantom_scan(std::size_t n, std::size_t z, double accel, std::size_t calib, std::uint64_t seed) {
  PhantomConfig pc;
  pc.h = pc.w = n;
  pc.coils = z;
  pc.ellipses = random_phantom_ellipses(seed);
  const auto mask = make_mask(n, n, accel, MaskPattern::kVariable, calib, seed + 1);
  return simulate_scan(make_phantom(pc), make_sens_maps(n, n, z, seed + 2), mask, 0.0, 0);
}

}  // namespace

TEST_CASE("planted kernel is recovered") {
  // One coil whose rows are linear in the column index, so every sample is the
  // mean of its left and right neighbours. With a 3x3 kernel that relation is
  // the unique exact predictor.
  const std::size_t h = 12, w = 12;
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 1.0);
  ComplexTensor ksp({1, h, w});
  for (std::size_t i = 0; i < h; ++i) {
    const cplx a{n(rng), n(rng)}, b{n(rng), n(rng)};
    for (std::size_t j = 0; j < w; ++j) ksp.at(0, i, j) = a + b * double(j);
  }
  const CalibWindow calib{0, 0, h, w};
  const SSKernel k = calibrate_kernel(ksp, calib, 3, 1e-9);
  REQUIRE(k.weights.shape() == Shape{1, 1, 3, 3});
  for (std::size_t t = 0; t < 9; ++t) {
    const cplx want = (t == 3 || t == 5) ? cplx{0.5, 0.0} : cplx{0.0, 0.0};
    CHECK(std::abs(k.weights[t] - want) <= 1e-5);
  }
  CHECK(k.weights[4] == cplx{0.0, 0.0});

  // The planted relation reproduces the data away from the zero-padded border.
  const ComplexTensor pred = kspace_correlate(k, ksp);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 1; i + 1 < h; ++i)
    for (std::size_t j = 1; j + 1 < w; ++j) {
      num += std::norm(pred.at(0, i, j) - ksp.at(0, i, j));
      den += std::norm(ksp.at(0, i, j));
    }
  CHECK(std::sqrt(num / den) <= 1e-4);
}

TEST_CASE("correlation and ss_apply match the brute-force oracle on 8x8") {
  for (std::size_t z : {1u, 2u, 3u}) {
    for (std::size_t kw : {1u, 3u, 5u}) {
      const SSKernel k = random_kernel(z, kw, 10 * z + kw);
      const ComplexTensor ksp = test::random_complex({z, 8, 8}, 100 + z + kw);
      const ComplexTensor want = brute_correlate(k.weights, ksp);
      CHECK(test::max_abs_diff(kspace_correlate(k, ksp), want) <= 1e-10 * test::l2(want));
      const ComplexTensor img = ifft2c(ksp);
      CHECK(test::rel_diff(ss_apply(k, img), ifft2c(want)) <= 1e-10);
    }
  }
}

TEST_CASE("adjoints") {
  const SSKernel k = random_kernel(3, 5, 2);
  const ComplexTensor x = test::random_complex({3, 10, 9}, 4);
  const ComplexTensor y = test::random_complex({3, 10, 9}, 5);
  const double scale = test::l2(x) * test::l2(y);
  CHECK(std::abs(test::inner(kspace_correlate(k, x), y) -
                 test::inner(x, kspace_correlate_adjoint(k, y))) <= 1e-10 * scale);
  CHECK(std::abs(test::inner(ss_apply(k, x), y) - test::inner(x, ss_apply_adjoint(k, y))) <=
        1e-10 * scale);
}

TEST_CASE("ss_apply is linear and the zero kernel gives zero") {
  const SSKernel k = random_kernel(2, 3, 8);
  const ComplexTensor x = test::random_complex({2, 8, 8}, 1);
  const ComplexTensor y = test::random_complex({2, 8, 8}, 2);
  const cplx a{0.5, -2.0}, b{1.5, 0.25};
  CHECK(test::rel_diff(ss_apply(k, lincomb(a, x, b, y)),
                       lincomb(a, ss_apply(k, x), b, ss_apply(k, y))) <= 1e-10);
  SSKernel zero = k;
  zero.weights.fill(cplx{0.0, 0.0});
  for (const cplx& v : ss_apply(zero, x).storage()) CHECK(v == cplx{0.0, 0.0});
}

TEST_CASE("calibration on phantom data") {
  const Scan s = phantom_scan(32, 4, 3.0, 12, 5);
  const SSKernel k = calibrate_kernel(s.und_ksp, s.mask.calib, 5, 1e-2);
  CHECK(k.weights.shape() == Shape{4, 4, 5, 5});
  for (std::size_t c = 0; c < 4; ++c) CHECK(k.weights[((c * 4 + c) * 5 + 2) * 5 + 2] == cplx{0.0, 0.0});
  const auto [res, target] = calibration_residual(s.und_ksp, s.mask.calib, k);
  CHECK(res <= target);
  CHECK(res < 0.5 * target);

  SUBCASE("huge kappa drives the kernel to zero") {
    const SSKernel big = calibrate_kernel(s.und_ksp, s.mask.calib, 5, 1e12);
    CHECK(test::l2(big.weights) < 1e-9 * std::max(1.0, test::l2(k.weights)));
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(calibrate_kernel(s.und_ksp, s.mask.calib, 4, 1e-2), ConfigError);
    CHECK_THROWS_AS(calibrate_kernel(s.und_ksp, s.mask.calib, 13, 1e-2), ConfigError);
  }
}

TEST_CASE("SPIRiT") {
  SUBCASE("full mask returns the zero-filled image") {
    Scan s = phantom_scan(24, 3, 1.0, 8, 2);
    const SSKernel k = calibrate_kernel(s.und_ksp, s.mask.calib, 3, 1e-2);
    for (std::size_t it : {0u, 1u, 5u}) {
      CHECK(test::rel_diff(spirit_reconstruct(s.und_ksp, s.mask.mask, k, it), ifft2c(s.und_ksp)) <
            1e-12);
    }
  }
  SUBCASE("improves on zero filling at R=2") {
    const Scan s = phantom_scan(64, 4, 2.0, 16, 3);
    const SSKernel k = calibrate_kernel(s.und_ksp, s.mask.calib, 5, 1e-2);
    const RealTensor ref = magnitude(coil_combine(s.truth_img, s.sens_maps));
    const RealTensor zf = magnitude(coil_combine(ifft2c(s.und_ksp), s.sens_maps));
    const RealTensor sp =
        magnitude(coil_combine(spirit_reconstruct(s.und_ksp, s.mask.mask, k, 30), s.sens_maps));
    const double gain = psnr(sp, ref) - psnr(zf, ref);
    MESSAGE("SPIRiT gain over zero filling: " << gain << " dB");
    CHECK(gain >= 3.0);
  }
  SUBCASE("stable across kappa") {
    const Scan s = phantom_scan(32, 4, 4.0, 12, 4);
    for (double kappa : {1e-3, 1e-2, 1e-1, 1.0}) {
      const SSKernel k = calibrate_kernel(s.und_ksp, s.mask.calib, 5, kappa);
      CHECK(all_finite(spirit_reconstruct(s.und_ksp, s.mask.mask, k, 13)));
    }
  }
}
