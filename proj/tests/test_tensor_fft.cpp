#include <doctest.h>

#include <numbers>

#include "psfnet/fft.hpp"
#include "support.hpp"

using namespace psfnet;
using psfnet::test::random_complex;

namespace {

// Direct centered unitary DFT of every plane.
ComplexTensor naive_dft(const ComplexTensor& x, double sign) {
  const std::size_t h = x.dim(x.ndim() - 2);
  const std::size_t w = x.dim(x.ndim() - 1);
  const std::size_t planes = x.size() / (h * w);
  const double ch = double(h / 2), cw = double(w / 2);
  ComplexTensor out(x.shape(), cplx{0.0, 0.0});
  for (std::size_t p = 0; p < planes; ++p) {
    for (std::size_t ky = 0; ky < h; ++ky) {
      for (std::size_t kx = 0; kx < w; ++kx) {
        cplx acc{0.0, 0.0};
        for (std::size_t y = 0; y < h; ++y) {
          for (std::size_t xx = 0; xx < w; ++xx) {
            const double ph = sign * 2.0 * std::numbers::pi *
                              ((double(ky) - ch) * (double(y) - ch) / double(h) +
                               (double(kx) - cw) * (double(xx) - cw) / double(w));
            acc += x[p * h * w + y * w + xx] * std::polar(1.0, ph);
          }
        }
        out[p * h * w + ky * w + kx] = acc / std::sqrt(double(h * w));
      }
    }
  }
  return out;
}

}  // namespace

TEST_CASE("tensor basics") {
  ComplexTensor t({2, 3, 4}, cplx{1.0, 2.0});
  CHECK(t.size() == 24);
  CHECK(t.ndim() == 3);
  CHECK(t.at(1, 2, 3) == cplx{1.0, 2.0});
  const auto view = t.slice(1);
  CHECK(view.size() == 12);
  CHECK(view.data() == t.data() + 12);
  CHECK_THROWS_AS(require_same_shape(t, ComplexTensor({3, 4}), "test"), ShapeError);
  const ComplexTensor a = random_complex({3, 5}, 1);
  const ComplexTensor b = random_complex({3, 5}, 2);
  const ComplexTensor c = lincomb(cplx{2.0, -1.0}, a, cplx{0.5, 0.0}, b);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(std::abs(c[i] - (cplx{2.0, -1.0} * a[i] + 0.5 * b[i])) < 1e-15);
  }
  CHECK(all_finite(a));
  ComplexTensor bad = a;
  bad[3] = cplx{std::nan(""), 0.0};
  CHECK_FALSE(all_finite(bad));
}

TEST_CASE("fft2c matches the direct DFT for power-of-two and other sizes") {
  for (auto [h, w] : {std::pair<std::size_t, std::size_t>{8, 8}, {4, 16}, {6, 10}, {5, 7}, {3, 2}}) {
    const ComplexTensor x = random_complex({2, h, w}, 100 + h * w);
    CHECK(test::rel_diff(fft2c(x), naive_dft(x, -1.0)) < 1e-12);
    CHECK(test::rel_diff(ifft2c(x), naive_dft(x, 1.0)) < 1e-12);
  }
}

TEST_CASE("constant image has only a centre coefficient") {
  const cplx c{0.7, -0.2};
  ComplexTensor img({1, 4, 4}, c);
  const ComplexTensor k = fft2c(img);
  for (std::size_t y = 0; y < 4; ++y) {
    for (std::size_t x = 0; x < 4; ++x) {
      const cplx want = (y == 2 && x == 2) ? 4.0 * c : cplx{0.0, 0.0};
      CHECK(std::abs(k.at(0, y, x) - want) < 1e-14);
    }
  }
  // And back: a centre spike is a constant image.
  ComplexTensor spike({1, 4, 4}, cplx{0.0, 0.0});
  spike.at(0, 2, 2) = 4.0 * c;
  const ComplexTensor back = ifft2c(spike);
  for (const cplx& v : back.storage()) CHECK(std::abs(v - c) < 1e-14);
}

TEST_CASE("zero maps to zero") {
  const ComplexTensor z({2, 8, 6}, cplx{0.0, 0.0});
  CHECK(fft2c(z) == z);
  CHECK(ifft2c(z) == z);
}

TEST_CASE("round trip, Parseval and linearity on random tensors") {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const std::size_t h = 2 + s % 7 * 2, w = 3 + s % 5;
    const ComplexTensor x = random_complex({3, h, w}, s);
    const ComplexTensor y = random_complex({3, h, w}, s + 1000);
    const ComplexTensor fx = fft2c(x);
    CHECK(test::rel_diff(ifft2c(fx), x) < 1e-12);
    CHECK(test::rel_diff(fft2c(ifft2c(x)), x) < 1e-12);
    CHECK(std::abs(norm2(fx) - norm2(x)) <= 1e-10 * norm2(x));
    const cplx a{0.3, 1.1}, b{-2.0, 0.4};
    CHECK(test::rel_diff(fft2c(lincomb(a, x, b, y)), lincomb(a, fx, b, fft2c(y))) < 1e-10);
  }
}

TEST_CASE("in-place transforms agree with the copying ones") {
  ComplexTensor x = random_complex({2, 16, 8}, 5);
  const ComplexTensor want = fft2c(x);
  fft2c_inplace(x);
  CHECK(x == want);
  ifft2c_inplace(x);
  CHECK(test::rel_diff(x, random_complex({2, 16, 8}, 5)) < 1e-12);
}

TEST_CASE("fft2c rejects degenerate shapes") {
  CHECK_THROWS_AS(fft2c(ComplexTensor({8}, cplx{})), ShapeError);
  CHECK_THROWS_AS(fft2c(ComplexTensor({1, 1, 8}, cplx{})), ShapeError);
}

TEST_CASE("norms") {
  const ComplexTensor a({1}, std::vector<cplx>{{3.0, 4.0}});
  CHECK(norm1(a) == doctest::Approx(5.0).epsilon(1e-15));
  CHECK(norm2(a) == doctest::Approx(5.0).epsilon(1e-15));
  const ComplexTensor b({2}, std::vector<cplx>{{1.0, 0.0}, {0.0, 1.0}});
  CHECK(norm1(b) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(norm2(b) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
  const ComplexTensor r = random_complex({4, 9, 7}, 77);
  long double sq = 0.0L;
  for (const cplx& v : r.storage()) sq += (long double)v.real() * v.real() + (long double)v.imag() * v.imag();
  CHECK(std::abs(norm2(r) * norm2(r) - double(sq)) <= 1e-12 * double(sq));
}
