#include <doctest.h>

#include <cmath>

#include "psfnet/sampling.hpp"

using namespace psfnet;

namespace {

std::size_t count_ones(const MaskTensor& m) {
  std::size_t n = 0;
  for (auto v : m.storage()) n += v;
  return n;
}

// Mean sampling rate inside the central quarter (middle half of each axis).
double central_rate(const MaskTensor& m) {
  const std::size_t h = m.dim(0), w = m.dim(1);
  double n = 0.0, tot = 0.0;
  for (std::size_t y = h / 4; y < 3 * h / 4; ++y)
    for (std::size_t x = w / 4; x < 3 * w / 4; ++x) {
      n += m.at(y, x);
      tot += 1.0;
    }
  return n / tot;
}

}  // namespace

TEST_CASE("R = 1 samples everything") {
  for (auto pat : {MaskPattern::kVariable, MaskPattern::kUniform}) {
    const SamplingMask m = make_mask(32, 24, 1.0, pat, 8, 3);
    CHECK(count_ones(m.mask) == 32 * 24);
  }
}

TEST_CASE("calibration window geometry") {
  const CalibWindow c = centered_calib_window(64, 64, 16);
  CHECK(c.h0 == 24);
  CHECK(c.w0 == 24);
  CHECK(c.count() == 256);
  CHECK(c.contains(24, 24));
  CHECK(c.contains(39, 39));
  CHECK_FALSE(c.contains(40, 39));
}

TEST_CASE("density expectation meets the budget within 1%") {
  for (auto pat : {MaskPattern::kVariable, MaskPattern::kUniform}) {
    for (double r : {2.0, 4.0, 6.0}) {
      const RealTensor d = sampling_density(64, 64, r, pat, 16);
      double sum = 0.0;
      for (double p : d.storage()) {
        CHECK(p >= 0.0);
        CHECK(p <= 1.0);
        sum += p;
      }
      CHECK(std::abs(sum - 4096.0 / r) <= 0.01 * 4096.0 / r);
      const CalibWindow c = centered_calib_window(64, 64, 16);
      for (std::size_t y = c.h0; y < c.h0 + c.ch; ++y)
        for (std::size_t x = c.w0; x < c.w0 + c.cw; ++x) CHECK(d.at(y, x) == 1.0);
    }
  }
}

TEST_CASE("64x64 R=4 variable-density rate over 100 seeds") {
  double mean = 0.0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    const SamplingMask m = make_mask(64, 64, 4.0, MaskPattern::kVariable, 16, s);
    const double rate = double(count_ones(m.mask)) / 4096.0;
    CHECK(rate >= 0.225);
    CHECK(rate <= 0.275);
    CHECK(std::abs(m.achieved_acceleration() - 4.0) <= 0.4);
    mean += rate / 100.0;
    const CalibWindow& c = m.calib;
    for (std::size_t y = c.h0; y < c.h0 + c.ch; ++y)
      for (std::size_t x = c.w0; x < c.w0 + c.cw; ++x) REQUIRE(m.mask.at(y, x) == 1);
  }
  CHECK(std::abs(mean - 0.25) < 0.005);
}

TEST_CASE("variable density concentrates samples centrally") {
  double var = 0.0, uni = 0.0;
  for (std::uint64_t s = 0; s < 50; ++s) {
    var += central_rate(make_mask(64, 64, 4.0, MaskPattern::kVariable, 16, s).mask);
    uni += central_rate(make_mask(64, 64, 4.0, MaskPattern::kUniform, 16, s).mask);
  }
  CHECK(var > uni);
}

TEST_CASE("masks are deterministic per seed") {
  const auto a = make_mask(48, 40, 3.0, MaskPattern::kVariable, 12, 9);
  const auto b = make_mask(48, 40, 3.0, MaskPattern::kVariable, 12, 9);
  const auto c = make_mask(48, 40, 3.0, MaskPattern::kVariable, 12, 10);
  CHECK(a.mask == b.mask);
  CHECK_FALSE(a.mask == c.mask);
}

TEST_CASE("infeasible or invalid acceleration is a config error") {
  CHECK_THROWS_AS(make_mask(64, 64, 4.0, MaskPattern::kVariable, 40, 0), ConfigError);
  CHECK_THROWS_AS(make_mask(64, 64, 0.5, MaskPattern::kUniform, 8, 0), ConfigError);
  CHECK_THROWS_AS(make_mask(64, 64, std::nan(""), MaskPattern::kUniform, 8, 0), ConfigError);
  CHECK_THROWS_AS(parse_mask_pattern("poisson"), ConfigError);
}

TEST_CASE("self-supervision split") {
  const SamplingMask m = make_mask(64, 64, 4.0, MaskPattern::kVariable, 16, 21);
  const SamplingMask s = split_for_selfsup(m, 0.4, 5);
  REQUIRE(s.split);
  validate_split(s);
  const auto& dc = s.split->dc_mask;
  const auto& loss = s.split->loss_mask;
  for (std::size_t i = 0; i < m.mask.size(); ++i) {
    CHECK((dc[i] | loss[i]) == m.mask[i]);
    CHECK((dc[i] & loss[i]) == 0);
  }
  for (std::size_t y = 0; y < 64; ++y)
    for (std::size_t x = 0; x < 64; ++x)
      if (s.calib.contains(y, x)) CHECK(dc.at(y, x) == 1);
  const double eligible = double(m.acquired() - m.calib.count());
  CHECK(std::abs(double(count_ones(loss)) - 0.4 * eligible) <= 1.0);
  CHECK(&s.dc_set() == &s.split->dc_mask);

  SUBCASE("tiny fraction keeps one loss sample") {
    const SamplingMask t = split_for_selfsup(m, 1e-9, 5);
    CHECK(count_ones(t.split->loss_mask) >= 1);
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(split_for_selfsup(m, 0.0, 1), ConfigError);
    CHECK_THROWS_AS(split_for_selfsup(m, 1.0, 1), ConfigError);
    CHECK_THROWS_AS(split_for_selfsup(s, 0.4, 1), ConfigError);
    SamplingMask broken = s;
    broken.split->loss_mask[0] = 1;
    broken.split->dc_mask[0] = 1;
    broken.mask[0] = 1;
    CHECK_THROWS_AS(validate_split(broken), ConfigError);
  }
}

TEST_CASE("split is disjoint and exhaustive over random masks") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto m = make_mask(32, 32, 2.5, seed % 2 ? MaskPattern::kUniform : MaskPattern::kVariable,
                             8, seed);
    const auto s = split_for_selfsup(m, 0.1 + 0.04 * double(seed), seed);
    for (std::size_t i = 0; i < m.mask.size(); ++i) {
      REQUIRE((s.split->dc_mask[i] | s.split->loss_mask[i]) == m.mask[i]);
      REQUIRE((s.split->dc_mask[i] & s.split->loss_mask[i]) == 0);
    }
  }
}
