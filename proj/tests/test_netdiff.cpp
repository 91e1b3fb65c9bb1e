#include <doctest.h>

#include "gradcheck.hpp"
#include "psfnet/calibration.hpp"
#include "psfnet/consistency.hpp"
#include "psfnet/fft.hpp"
#include "support.hpp"

using namespace psfnet;
using nd::Tape;
using nd::Var;

namespace {

// Real leaf [2z,h,w] viewed as a complex [z,h,w] tensor.
Var as_complex(Tape& t, Var p) { return nd::unpack_complex(t, p); }

// Scalar probe 0.7 sum(Re v) + ||v + c||^2, exercising both gradient paths.
Var probe(Tape& t, Var v, const ComplexTensor& c) {
  return nd::add(t, nd::real_sum(t, nd::scale(t, t.constant(RealTensor({1}, 0.7)), 0, v)),
                 nd::squared_norm(t, nd::add(t, v, t.constant(c))));
}

}  // namespace

TEST_CASE("elementary gradients") {
  SUBCASE("squared norm of a leaf") {
    const RealTensor x = test::random_real({3, 4}, 1);
    Tape t;
    const Var p = t.parameter(x);
    t.backward(nd::squared_norm(t, p));
    const auto g = std::as_const(t).real_grad(p);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(g[i] == doctest::Approx(2.0 * x[i]));
  }
  SUBCASE("scalar times constant") {
    const ComplexTensor c = test::random_complex({2, 3}, 2);
    Tape t;
    const Var s = t.parameter(RealTensor({2}, std::vector<double>{0.3, -1.2}));
    t.backward(nd::real_sum(t, nd::scale(t, s, 1, t.constant(c))));
    double want = 0.0;
    for (const cplx& v : c.storage()) want += v.real();
    CHECK(std::as_const(t).real_grad(s)[1] == doctest::Approx(want));
    CHECK(std::as_const(t).real_grad(s)[0] == 0.0);
  }
  SUBCASE("relu passes gradient only where the input is positive") {
    const RealTensor x({5}, std::vector<double>{-1.0, 0.0, 2.0, -0.5, 3.0});
    Tape t;
    const Var p = t.parameter(x);
    t.backward(nd::real_sum(t, nd::relu(t, p)));
    const auto g = std::as_const(t).real_grad(p);
    const double want[] = {0.0, 0.0, 1.0, 0.0, 1.0};
    for (std::size_t i = 0; i < 5; ++i) CHECK(g[i] == want[i]);
  }
}

TEST_CASE("tape state errors") {
  Tape empty;
  CHECK_THROWS_AS(empty.backward(Var{0}), StateError);
  Tape t;
  const Var p = t.parameter(RealTensor({2}, 1.0));
  CHECK_THROWS_AS(std::as_const(t).real_grad(p), StateError);
  const Var nonscalar = nd::relu(t, p);
  CHECK_THROWS_AS(t.backward(nonscalar), StateError);
  const Var l = nd::squared_norm(t, p);
  t.backward(l);
  CHECK_THROWS_AS(t.backward(l), StateError);
  Tape inference(false);
  const Var q = inference.constant(RealTensor({1}, 2.0));
  CHECK_THROWS_AS(inference.backward(nd::squared_norm(inference, q)), StateError);
}

TEST_CASE("primitive gradients match central differences") {
  const std::size_t z = 2, h = 6, w = 5;
  const RealTensor x0 = test::random_real({2 * z, h, w}, 11);
  const ComplexTensor c = test::random_complex({z, h, w}, 12);
  const ComplexTensor target = test::random_complex({z, h, w}, 13);
  const MaskTensor mask = test::random_mask(h, w, 0.5, 14);
  SSKernel k;
  k.kernel_size = 3;
  k.weights = test::random_complex({z, z, 3, 3}, 15);

  using Build = std::function<Var(Tape&, Var)>;
  const std::vector<std::pair<const char*, Build>> cases = {
      {"pack/unpack", [&](Tape& t, Var p) { return probe(t, as_complex(t, nd::pack_complex(t, as_complex(t, p))), c); }},
      {"fft2c", [&](Tape& t, Var p) { return probe(t, nd::fft2c(t, as_complex(t, p)), c); }},
      {"ifft2c", [&](Tape& t, Var p) { return probe(t, nd::ifft2c(t, as_complex(t, p)), c); }},
      {"ss_apply", [&](Tape& t, Var p) { return probe(t, nd::ss_apply(t, k, as_complex(t, p)), c); }},
      {"dc strict", [&](Tape& t, Var p) { return probe(t, nd::dc_project(t, as_complex(t, p), target, mask, kStrictDc), c); }},
      {"dc soft", [&](Tape& t, Var p) { return probe(t, nd::dc_project(t, as_complex(t, p), target, mask, 1.0), c); }},
      {"hybrid", [&](Tape& t, Var p) { return nd::hybrid_loss(t, as_complex(t, p), target); }},
      {"hybrid masked", [&](Tape& t, Var p) { return nd::hybrid_loss(t, as_complex(t, p), target, &mask); }},
      {"relu", [&](Tape& t, Var p) { return nd::squared_norm(t, nd::relu(t, p)); }},
  };
  for (const auto& [name, build] : cases) {
    const auto r = test::check_gradient(x0, build);
    INFO(name << " worst entry " << r.worst);
    CHECK(r.max_rel <= 1e-6);
  }

  SUBCASE("conv2d with respect to input, weight and bias") {
    const RealTensor wt = test::random_real({3, 2 * z, 3, 3}, 21);
    const RealTensor b = test::random_real({3}, 22);
    const RealTensor gy = test::random_real({3, h, w}, 23);
    const auto via_x = test::check_gradient(x0, [&](Tape& t, Var p) {
      return nd::squared_norm(t, nd::add(t, nd::conv2d(t, p, t.constant(wt), t.constant(b)), t.constant(gy)));
    });
    const auto via_w = test::check_gradient(wt, [&](Tape& t, Var p) {
      return nd::squared_norm(t, nd::add(t, nd::conv2d(t, t.constant(x0), p, t.constant(b)), t.constant(gy)));
    });
    const auto via_b = test::check_gradient(b, [&](Tape& t, Var p) {
      return nd::squared_norm(t, nd::add(t, nd::conv2d(t, t.constant(x0), t.constant(wt), p), t.constant(gy)));
    });
    CHECK(via_x.max_rel <= 1e-6);
    CHECK(via_w.max_rel <= 1e-6);
    CHECK(via_b.max_rel <= 1e-6);
  }
}

TEST_CASE("fixed linear nodes satisfy the adjoint identity") {
  const ComplexTensor x = test::random_complex({3, 8, 6}, 31);
  const ComplexTensor y = test::random_complex({3, 8, 6}, 32);
  const double scale = test::l2(x) * test::l2(y);
  const MaskTensor m = test::random_mask(8, 6, 0.4, 33);
  CHECK(std::abs(test::inner(fft2c(x), y) - test::inner(x, ifft2c(y))) <= 1e-8 * scale);
  for (double lambda : {kStrictDc, 1.0, 0.1}) {
    CHECK(std::abs(test::inner(dc_linear_part(x, m, lambda), y) -
                   test::inner(x, dc_linear_part(y, m, lambda))) <= 1e-8 * scale);
  }
  // Through the tape: d||F x + y||^2 / dx at x = 0 is 2 F^H y.
  Tape t;
  const Var p = t.parameter(RealTensor({6, 8, 6}, 0.0));
  t.backward(nd::squared_norm(t, nd::add(t, nd::fft2c(t, nd::unpack_complex(t, p)), t.constant(y))));
  const ComplexTensor want = ifft2c(y);
  const auto g = std::as_const(t).real_grad(p);
  double err = 0.0;
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < 48; ++i) {
      err = std::max(err, std::abs(g[(2 * c) * 48 + i] - 2.0 * want[c * 48 + i].real()));
      err = std::max(err, std::abs(g[(2 * c + 1) * 48 + i] - 2.0 * want[c * 48 + i].imag()));
    }
  CHECK(err <= 1e-12);
}

TEST_CASE("SG block") {
  SUBCASE("parameter count") {
    for (auto [z, ch] : {std::pair<std::size_t, std::size_t>{1, 1}, {2, 4}, {4, 16}, {5, 64}}) {
      CHECK(nd::init_params(z, ch, 0).parameter_count() == nd::sg_parameter_count(z, ch));
    }
    CHECK(nd::sg_parameter_count(4, 16) == 9 * (8 * 16 + 4 * 256 + 16 * 8) + 5 * 16 + 8);
  }
  SUBCASE("zero parameters give zero output") {
    const ComplexTensor x = test::random_complex({2, 8, 8}, 1);
    for (const cplx& v : nd::sg_forward(nd::zero_params(2, 4), x).storage()) CHECK(v == cplx{});
  }
  SUBCASE("identity construction reproduces the input exactly") {
    const ComplexTensor x = test::random_complex({3, 9, 7}, 2);
    CHECK(nd::sg_forward(nd::identity_params(3), x) == x);
  }
  SUBCASE("receptive field is 13x13") {
    const auto p = nd::init_params(2, 4, 3);
    const ComplexTensor x = test::random_complex({2, 24, 24}, 4);
    ComplexTensor x2 = x;
    const std::size_t py = 11, px = 12;
    x2.at(1, py, px) += cplx{1.0, -1.0};
    const ComplexTensor a = nd::sg_forward(p, x), b = nd::sg_forward(p, x2);
    bool inside_changed = false;
    for (std::size_t c = 0; c < 2; ++c)
      for (std::size_t y = 0; y < 24; ++y)
        for (std::size_t xx = 0; xx < 24; ++xx) {
          const bool near = std::abs(long(y) - long(py)) <= 6 && std::abs(long(xx) - long(px)) <= 6;
          if (!near) REQUIRE(a.at(c, y, xx) == b.at(c, y, xx));
          if (near && a.at(c, y, xx) != b.at(c, y, xx)) inside_changed = true;
        }
    CHECK(inside_changed);
  }
  SUBCASE("initialization statistics and determinism") {
    const auto p = nd::init_params(4, 16, 9);
    CHECK(p == nd::init_params(4, 16, 9));
    CHECK_FALSE(p == nd::init_params(4, 16, 10));
    double acc = 0.0;
    std::size_t n = 0;
    for (std::size_t l = 1; l <= 4; ++l) {
      const double fan_in = double(p.layer_in(l) * 9);
      for (double v : p.weights[l].storage()) {
        acc += v * v * fan_in / 2.0;
        ++n;
      }
    }
    CHECK(n >= 9000);
    CHECK(std::abs(acc / double(n) - 1.0) <= 0.2);
    for (const auto& b : p.biases)
      for (double v : b.storage()) CHECK(v == 0.0);
  }
  SUBCASE("channel mismatch") {
    Tape t;
    const auto v = nd::bind(t, nd::init_params(2, 4, 0), false);
    CHECK_THROWS_AS(nd::sg_forward(t, v, 2, t.constant(test::random_complex({3, 8, 8}, 0))),
                    ShapeError);
  }
}

TEST_CASE("SG block gradients") {
  const std::size_t z = 1, ch = 3;
  const nd::SGBlockParams base = nd::init_params(z, ch, 5);
  const ComplexTensor x = test::random_complex({z, 7, 6}, 6);
  const ComplexTensor target = test::random_complex({z, 7, 6}, 7);
  for (std::size_t layer = 0; layer < nd::SGBlockParams::kLayers; ++layer) {
    const auto r = test::check_gradient(base.weights[layer], [&](Tape& t, Var p) {
      nd::SGBlockVars v = nd::bind(t, base, false);
      v.weights[layer] = p;
      return nd::hybrid_loss(t, nd::sg_forward(t, v, z, t.constant(x)), target);
    });
    INFO("layer " << layer);
    CHECK(r.max_rel <= 1e-4);
  }
}
