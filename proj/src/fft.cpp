#include "psfnet/fft.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <utility>

namespace psfnet {

// One centered 1-D transform of fixed length. Power-of-two lengths use an
// iterative radix-2 transform; other lengths fall back to a direct DFT.
class FftPlan::Line {
 public:
  Line(std::size_t n, FftDirection dir) : n_(n), center_(n / 2), scale_(1.0 / std::sqrt(double(n))) {
    const double sign = dir == FftDirection::kForward ? -1.0 : 1.0;
    pow2_ = (n & (n - 1)) == 0;
    twiddle_.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
      const double phase = sign * 2.0 * std::numbers::pi * double(k) / double(n);
      twiddle_[k] = {std::cos(phase), std::sin(phase)};
    }
    if (pow2_) {
      bitrev_.resize(n);
      std::size_t bits = 0;
      while ((std::size_t{1} << bits) < n) ++bits;
      for (std::size_t i = 0; i < n; ++i) {
        std::size_t r = 0;
        for (std::size_t b = 0; b < bits; ++b) {
          if (i & (std::size_t{1} << b)) r |= std::size_t{1} << (bits - 1 - b);
        }
        bitrev_[i] = r;
      }
    }
  }

  // Reads n samples at `in` with stride `is`, writes to `out` with stride `os`.
  // `scratch` must hold 2n values.
  void run(const cplx* in, std::size_t is, cplx* out, std::size_t os, cplx* scratch) const {
    cplx* buf = scratch;
    // ifftshift on input: buf[m] = in[(m + c) mod n]
    for (std::size_t m = 0; m < n_; ++m) {
      const std::size_t src = (m + center_) % n_;
      buf[pow2_ ? bitrev_[m] : m] = in[src * is];
    }
    cplx* res = buf;
    if (pow2_) {
      for (std::size_t len = 2; len <= n_; len <<= 1) {
        const std::size_t half = len / 2;
        const std::size_t step = n_ / len;
        for (std::size_t start = 0; start < n_; start += len) {
          for (std::size_t j = 0; j < half; ++j) {
            const cplx t = twiddle_[j * step] * buf[start + j + half];
            const cplx u = buf[start + j];
            buf[start + j] = u + t;
            buf[start + j + half] = u - t;
          }
        }
      }
    } else {
      res = scratch + n_;
      for (std::size_t k = 0; k < n_; ++k) {
        cplx acc = 0.0;
        for (std::size_t m = 0; m < n_; ++m) acc += twiddle_[(k * m) % n_] * buf[m];
        res[k] = acc;
      }
    }
    // fftshift on output: out[k] = res[(k - c) mod n]
    for (std::size_t k = 0; k < n_; ++k) {
      out[k * os] = res[(k + n_ - center_) % n_] * scale_;
    }
  }

  std::size_t size() const noexcept { return n_; }

 private:
  std::size_t n_;
  std::size_t center_;
  double scale_;
  bool pow2_ = false;
  std::vector<cplx> twiddle_;
  std::vector<std::size_t> bitrev_;
};

namespace {

std::shared_ptr<const FftPlan::Line> cached_line(std::size_t n, FftDirection dir);

}  // namespace

FftPlan::FftPlan(std::size_t height, std::size_t width, FftDirection direction)
    : height_(height), width_(width), direction_(direction) {
  if (height < 1 || width < 1) throw ShapeError("FftPlan: empty plane");
  rows_ = cached_line(width, direction);
  cols_ = cached_line(height, direction);
}

void FftPlan::execute(std::span<cplx> plane) const {
  if (plane.size() != height_ * width_) throw ShapeError("FftPlan: plane size mismatch");
  const std::size_t longest = std::max(height_, width_);
  std::vector<cplx> scratch(2 * longest);
  std::vector<cplx> line(longest);
  for (std::size_t y = 0; y < height_; ++y) {
    cplx* row = plane.data() + y * width_;
    rows_->run(row, 1, line.data(), 1, scratch.data());
    std::copy_n(line.data(), width_, row);
  }
  for (std::size_t x = 0; x < width_; ++x) {
    cplx* col = plane.data() + x;
    cols_->run(col, width_, line.data(), 1, scratch.data());
    for (std::size_t y = 0; y < height_; ++y) col[y * width_] = line[y];
  }
}

namespace {

std::shared_ptr<const FftPlan::Line> cached_line(std::size_t n, FftDirection dir) {
  static std::mutex mu;
  static std::map<std::pair<std::size_t, int>, std::shared_ptr<const FftPlan::Line>> cache;
  std::lock_guard lock(mu);
  auto& slot = cache[{n, static_cast<int>(dir)}];
  if (!slot) slot = std::make_shared<const FftPlan::Line>(n, dir);
  return slot;
}

void transform_planes(ComplexTensor& x, FftDirection dir) {
  if (x.ndim() < 2) throw ShapeError("fft2c: need at least 2 dimensions, got " + shape_to_string(x.shape()));
  const std::size_t h = x.dim(x.ndim() - 2);
  const std::size_t w = x.dim(x.ndim() - 1);
  if (h < 2 || w < 2) throw ShapeError("fft2c: plane must be at least 2x2");
  const FftPlan plan(h, w, dir);
  const std::size_t planes = x.size() / (h * w);
  for (std::size_t p = 0; p < planes; ++p) {
    plan.execute(x.span().subspan(p * h * w, h * w));
  }
}

}  // namespace

void fft2c_inplace(ComplexTensor& x) { transform_planes(x, FftDirection::kForward); }
void ifft2c_inplace(ComplexTensor& x) { transform_planes(x, FftDirection::kInverse); }

ComplexTensor fft2c(const ComplexTensor& img) {
  ComplexTensor out = img;
  fft2c_inplace(out);
  return out;
}

ComplexTensor ifft2c(const ComplexTensor& ksp) {
  ComplexTensor out = ksp;
  ifft2c_inplace(out);
  return out;
}

double norm1(std::span<const cplx> x) {
  double acc = 0.0;
  for (const cplx& v : x) acc += std::abs(v);
  return acc;
}

double norm2(std::span<const cplx> x) {
  double acc = 0.0;
  for (const cplx& v : x) acc += std::norm(v);
  return std::sqrt(acc);
}

}  // namespace psfnet
