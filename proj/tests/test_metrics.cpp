#include <doctest.h>

#include <random>

#include "psfnet/metrics.hpp"
#include "support.hpp"

using namespace psfnet;

namespace {

// Two-sided p-value by enumerating every sign assignment of the mid-ranks.
double brute_wilcoxon(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> d;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] != b[i]) d.push_back(a[i] - b[i]);
  const std::size_t n = d.size();
  if (n == 0) return 1.0;
  std::vector<double> r(n);
  for (std::size_t i = 0; i < n; ++i) {
    double less = 0.0, equal = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (std::abs(d[j]) < std::abs(d[i])) less += 1.0;
      if (std::abs(d[j]) == std::abs(d[i])) equal += 1.0;
    }
    r[i] = less + (equal + 1.0) / 2.0;
  }
  double total = 0.0, w = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    total += r[i];
    if (d[i] > 0) w += r[i];
  }
  const double dev = std::abs(w - total / 2.0);
  std::size_t extreme = 0;
  for (std::size_t bits = 0; bits < (std::size_t(1) << n); ++bits) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (bits >> i & 1) s += r[i];
    if (std::abs(s - total / 2.0) >= dev - 1e-9) ++extreme;
  }
  return double(extreme) / double(std::size_t(1) << n);
}

RealTensor smooth_image(std::size_t n, std::uint64_t seed) {
  RealTensor img({n, n});
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double a = u(rng), b = u(rng);
  for (std::size_t y = 0; y < n; ++y)
    for (std::size_t x = 0; x < n; ++x)
      img.at(y, x) = 1.0 + std::sin(0.3 * double(x) + a) * std::cos(0.2 * double(y) + b) + 0.2 * u(rng);
  return img;
}

}  // namespace

TEST_CASE("PSNR") {
  SUBCASE("identical images give the sentinel") {
    const RealTensor x = test::random_real({8, 8}, 1, 0.0, 1.0);
    CHECK(psnr(x, x) == kPsnrIdentical);
    CHECK(std::isinf(psnr(x, x)));
  }
  SUBCASE("one pixel off by one on a 10x10 grid of ones is 20 dB") {
    RealTensor ref({10, 10}, 1.0);
    RealTensor rec = ref;
    rec.at(4, 7) = 2.0;
    CHECK(psnr(rec, ref) == doctest::Approx(20.0).epsilon(1e-12));
  }
  SUBCASE("matches a two-pass computation and is scale invariant") {
    for (std::uint64_t s = 0; s < 5; ++s) {
      const RealTensor ref = test::random_real({12, 9}, s, 0.0, 2.0);
      const RealTensor rec = test::random_real({12, 9}, s + 50, 0.0, 2.0);
      double mx = 0.0;
      for (double v : ref.storage()) mx = std::max(mx, v);
      double mse = 0.0;
      for (std::size_t i = 0; i < ref.size(); ++i) mse += (rec[i] - ref[i]) * (rec[i] - ref[i]);
      mse /= double(ref.size());
      CHECK(psnr(rec, ref) == doctest::Approx(10.0 * std::log10(mx * mx / mse)).epsilon(1e-12));
      RealTensor r3 = ref, c3 = rec;
      for (double& v : r3.storage()) v *= 3.5;
      for (double& v : c3.storage()) v *= 3.5;
      CHECK(psnr(c3, r3) == doctest::Approx(psnr(rec, ref)).epsilon(1e-12));
    }
  }
  SUBCASE("shape mismatch") {
    CHECK_THROWS_AS(psnr(RealTensor({3, 3}, 1.0), RealTensor({3, 4}, 1.0)), ShapeError);
  }
}

TEST_CASE("SSIM") {
  const RealTensor ref = smooth_image(32, 1);
  CHECK(ssim(ref, ref) == 1.0);

  SUBCASE("affine distortions lower SSIM monotonically") {
    double prev = 1.0;
    for (double a : {1.02, 1.1, 1.3, 1.6}) {
      RealTensor r = ref;
      for (double& v : r.storage()) v *= a;
      const double s = ssim(r, ref);
      CHECK(s < prev);
      prev = s;
    }
    prev = 1.0;
    for (double b : {0.02, 0.1, 0.3, 0.8}) {
      RealTensor r = ref;
      for (double& v : r.storage()) v += b;
      const double s = ssim(r, ref);
      CHECK(s < prev);
      prev = s;
    }
  }
  SUBCASE("negation is anticorrelated") {
    // Checkerboard texture: local means vanish, so the luminance term stays
    // near 1 and the sign comes from the structure term.
    RealTensor tex({32, 32});
    for (std::size_t y = 0; y < 32; ++y)
      for (std::size_t x = 0; x < 32; ++x) tex.at(y, x) = (x + y) % 2 ? -1.0 : 1.0;
    RealTensor neg = tex;
    for (double& v : neg.storage()) v = -v;
    CHECK(ssim(neg, tex) < 0.0);
  }
  SUBCASE("values stay in [-1, 1]") {
    for (std::uint64_t s = 0; s < 5; ++s) {
      const double v = ssim(test::random_real({16, 16}, s, -1.0, 1.0), test::random_real({16, 16}, s + 9, 0.0, 1.0));
      CHECK(v >= -1.0);
      CHECK(v <= 1.0);
    }
  }
  SUBCASE("images smaller than the window are rejected") {
    CHECK_THROWS_AS(ssim(RealTensor({10, 20}, 1.0), RealTensor({10, 20}, 1.0)), ConfigError);
  }
}

TEST_CASE("Wilcoxon signed-rank") {
  SUBCASE("documented examples") {
    const std::vector<double> a{3.0, 1.0, 4.0, 1.0, 5.0};
    CHECK(wilcoxon_signed_rank(a, a) == 1.0);
    const std::vector<double> five{1, 2, 3, 4, 5}, zeros(5, 0.0);
    CHECK(wilcoxon_signed_rank(five, zeros) == doctest::Approx(0.0625).epsilon(1e-15));
    const std::vector<double> sym{1, -1, 2, -2}, z4(4, 0.0);
    CHECK(wilcoxon_signed_rank(sym, z4) == 1.0);
    CHECK(wilcoxon_statistic(five, zeros) == 15.0);
  }
  SUBCASE("reference values") {
    const std::vector<double> d{1, 2, -3, 4, 5, 6, -7, 8};
    CHECK(wilcoxon_signed_rank(d, std::vector<double>(8, 0.0)) == doctest::Approx(0.3125).epsilon(1e-12));
    std::vector<double> big;
    for (int i = 1; i <= 25; ++i) big.push_back(i);
    CHECK(wilcoxon_signed_rank(big, std::vector<double>(25, 0.0)) ==
          doctest::Approx(1.3070605478013029e-05).epsilon(1e-9));
    const std::vector<double> ties{1,  -2, 3,  4,  -5, 6,  7,  8,  -9, 10, 11, 12, 13, -14, 15,
                                   16, 17, 18, 19, 20, 21, -22, 23, 24, 25, 2,  3,  -3,  7,  7};
    CHECK(wilcoxon_signed_rank(ties, std::vector<double>(30, 0.0)) ==
          doctest::Approx(0.0012831971259411649).epsilon(1e-9));
  }
  SUBCASE("exact path equals enumeration for n <= 10") {
    std::mt19937_64 rng(4);
    std::uniform_int_distribution<int> small(-4, 4);
    std::normal_distribution<double> gauss(0.3, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
      const std::size_t n = 1 + trial % 10;
      std::vector<double> a(n), b(n, 0.0);
      for (auto& v : a) v = trial % 2 ? double(small(rng)) : gauss(rng);  // odd trials have ties and zeros
      REQUIRE(wilcoxon_signed_rank(a, b) == doctest::Approx(brute_wilcoxon(a, b)).epsilon(1e-12));
    }
  }
  SUBCASE("exact path up to n = 20 stays a probability and is symmetric") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<double> a(20), b(20);
    for (std::size_t i = 0; i < 20; ++i) {
      a[i] = g(rng);
      b[i] = g(rng);
    }
    const double p = wilcoxon_signed_rank(a, b);
    CHECK(p > 0.0);
    CHECK(p <= 1.0);
    CHECK(wilcoxon_signed_rank(b, a) == doctest::Approx(p).epsilon(1e-14));
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(wilcoxon_signed_rank({1.0}, {1.0, 2.0}), ShapeError);
    CHECK_THROWS_AS(wilcoxon_signed_rank({}, {}), ConfigError);
  }
}

TEST_CASE("report aggregation") {
  const Summary s = summarize({1.0, 2.0, 4.0, 5.0});
  CHECK(s.mean == 3.0);
  CHECK(s.std_error == doctest::Approx(std::sqrt(10.0 / 3.0) / 2.0).epsilon(1e-14));
  CHECK(summarize({7.0}).std_error == 0.0);

  EvalReport r;
  r.methods.push_back({"a", {"s0", "s1", "s2"}, {30.0, 31.0, 29.0}, {0.9, 0.8, 0.85}});
  r.methods.push_back({"b", {"s0", "s1", "s2"}, {30.0, 31.0, 29.0}, {0.9, 0.8, 0.85}});
  r.methods.push_back({"c", {"s0", "s1", "s2"}, {kPsnrIdentical, 35.0, 33.0}, {1.0, 0.95, 0.9}});
  compute_pairwise(r);
  REQUIRE(r.pairwise.size() == 3);
  CHECK(r.pairwise[0].method_a == "a");
  CHECK(r.pairwise[0].method_b == "b");
  CHECK(r.pairwise[0].p_psnr == 1.0);
  CHECK(r.pairwise[0].p_ssim == 1.0);
  CHECK(r.pairwise[1].p_psnr == doctest::Approx(0.25));
}
