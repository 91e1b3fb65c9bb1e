#include "psfnet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace psfnet {

double psnr(const RealTensor& recon_mag, const RealTensor& ref_mag) {
  require_same_shape(recon_mag, ref_mag, "psnr");
  if (ref_mag.empty()) throw ConfigError("psnr: empty images");
  double sq = 0.0;
  double peak = 0.0;
  for (std::size_t i = 0; i < ref_mag.size(); ++i) {
    const double d = recon_mag[i] - ref_mag[i];
    sq += d * d;
    peak = std::max(peak, ref_mag[i]);
  }
  if (sq == 0.0) return kPsnrIdentical;
  const double rmse = std::sqrt(sq / double(ref_mag.size()));
  return 20.0 * std::log10(peak / rmse);
}

namespace {

constexpr std::size_t kWindow = 11;
constexpr double kSigma = 1.5;

std::array<double, kWindow> gaussian_taps() {
  std::array<double, kWindow> g{};
  double sum = 0.0;
  for (std::size_t i = 0; i < kWindow; ++i) {
    const double d = double(i) - double(kWindow / 2);
    g[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
    sum += g[i];
  }
  for (double& v : g) v /= sum;
  return g;
}

// Separable 'valid' filtering of an h x w image.
std::vector<double> filter_valid(const std::vector<double>& img, std::size_t h, std::size_t w,
                                 const std::array<double, kWindow>& g) {
  const std::size_t oh = h - kWindow + 1;
  const std::size_t ow = w - kWindow + 1;
  std::vector<double> rows(h * ow, 0.0);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (std::size_t k = 0; k < kWindow; ++k) acc += g[k] * img[y * w + x + k];
      rows[y * ow + x] = acc;
    }
  }
  std::vector<double> out(oh * ow, 0.0);
  for (std::size_t y = 0; y < oh; ++y) {
    for (std::size_t x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (std::size_t k = 0; k < kWindow; ++k) acc += g[k] * rows[(y + k) * ow + x];
      out[y * ow + x] = acc;
    }
  }
  return out;
}

}  // namespace

double ssim(const RealTensor& recon_mag, const RealTensor& ref_mag) {
  require_same_shape(recon_mag, ref_mag, "ssim");
  if (ref_mag.ndim() != 2 || ref_mag.dim(0) < kWindow || ref_mag.dim(1) < kWindow) {
    throw ConfigError("ssim: images must be 2-D and at least 11x11");
  }
  const std::size_t h = ref_mag.dim(0);
  const std::size_t w = ref_mag.dim(1);
  const double range = *std::max_element(ref_mag.storage().begin(), ref_mag.storage().end());
  const double c1 = (0.01 * range) * (0.01 * range);
  const double c2 = (0.03 * range) * (0.03 * range);
  const auto g = gaussian_taps();

  const std::vector<double>& x = recon_mag.storage();
  const std::vector<double>& y = ref_mag.storage();
  std::vector<double> xx(x.size()), yy(x.size()), xy(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    xx[i] = x[i] * x[i];
    yy[i] = y[i] * y[i];
    xy[i] = x[i] * y[i];
  }
  const auto mx = filter_valid(x, h, w, g);
  const auto my = filter_valid(y, h, w, g);
  const auto sxx = filter_valid(xx, h, w, g);
  const auto syy = filter_valid(yy, h, w, g);
  const auto sxy = filter_valid(xy, h, w, g);

  double total = 0.0;
  for (std::size_t i = 0; i < mx.size(); ++i) {
    const double vx = sxx[i] - mx[i] * mx[i];
    const double vy = syy[i] - my[i] * my[i];
    const double cov = sxy[i] - mx[i] * my[i];
    const double num = (2.0 * mx[i] * my[i] + c1) * (2.0 * cov + c2);
    const double den = (mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2);
    // Both terms vanish only for an all-zero window pair, which is a match.
    total += den > 0.0 ? num / den : 1.0;
  }
  return total / double(mx.size());
}

namespace {

struct SignedRanks {
  std::vector<double> ranks;  // mid-ranks of |d| for non-zero d
  std::vector<bool> positive;
};

SignedRanks signed_ranks(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw ShapeError("wilcoxon: samples must be paired");
  if (a.empty()) throw ConfigError("wilcoxon: empty samples");
  std::vector<double> d;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double v = a[i] - b[i];
    if (std::isnan(v)) throw NumericError("wilcoxon: NaN difference");
    if (v != 0.0) d.push_back(v);
  }
  std::vector<std::size_t> idx(d.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(),
            [&](std::size_t i, std::size_t j) { return std::abs(d[i]) < std::abs(d[j]); });
  SignedRanks sr{std::vector<double>(d.size()), std::vector<bool>(d.size())};
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && std::abs(d[idx[j + 1]]) == std::abs(d[idx[i]])) ++j;
    const double mid = 0.5 * double(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) sr.ranks[idx[k]] = mid;
    i = j + 1;
  }
  for (std::size_t i = 0; i < d.size(); ++i) sr.positive[i] = d[i] > 0.0;
  return sr;
}

}  // namespace

double wilcoxon_statistic(const std::vector<double>& a, const std::vector<double>& b) {
  const SignedRanks sr = signed_ranks(a, b);
  double w = 0.0;
  for (std::size_t i = 0; i < sr.ranks.size(); ++i) {
    if (sr.positive[i]) w += sr.ranks[i];
  }
  return w;
}

double wilcoxon_signed_rank(const std::vector<double>& a, const std::vector<double>& b) {
  const SignedRanks sr = signed_ranks(a, b);
  const std::size_t n = sr.ranks.size();
  if (n == 0) return 1.0;
  double w = 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    total += sr.ranks[i];
    if (sr.positive[i]) w += sr.ranks[i];
  }
  const double mean = 0.5 * total;
  const double dev = std::abs(w - mean);

  if (n <= 20) {
    // Mid-ranks are multiples of 1/2, so doubled ranks are integers and the
    // null distribution of 2W is a subset-sum count over them.
    std::vector<std::size_t> r2(n);
    std::size_t max_sum = 0;
    for (std::size_t i = 0; i < n; ++i) {
      r2[i] = static_cast<std::size_t>(std::llround(2.0 * sr.ranks[i]));
      max_sum += r2[i];
    }
    std::vector<double> count(max_sum + 1, 0.0);
    count[0] = 1.0;
    std::size_t reach = 0;
    for (std::size_t r : r2) {
      for (std::size_t s = reach + 1; s-- > 0;) {
        if (count[s] != 0.0) count[s + r] += count[s];
      }
      reach += r;
    }
    const double mean2 = double(max_sum) / 2.0;
    const double dev2 = 2.0 * dev;
    double extreme = 0.0;
    for (std::size_t s = 0; s <= max_sum; ++s) {
      // Small slack absorbs rounding in the half-integer comparison.
      if (std::abs(double(s) - mean2) >= dev2 - 1e-9) extreme += count[s];
    }
    return std::min(1.0, extreme / std::ldexp(1.0, int(n)));
  }

  double tie_term = 0.0;
  std::vector<double> sorted = sr.ranks;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && sorted[j + 1] == sorted[i]) ++j;
    const double t = double(j - i + 1);
    tie_term += t * t * t - t;
    i = j + 1;
  }
  const double nn = double(n);
  const double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0 - tie_term / 48.0;
  if (var <= 0.0) return 1.0;
  const double zscore = std::max(0.0, dev - 0.5) / std::sqrt(var);
  return std::min(1.0, std::erfc(zscore / std::sqrt(2.0)));
}

Summary summarize(const std::vector<double>& v) {
  Summary s;
  if (v.empty()) return s;
  const double n = double(v.size());
  s.mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  if (v.size() > 1 && std::isfinite(s.mean)) {
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.std_error = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
  }
  return s;
}

void compute_pairwise(EvalReport& report) {
  report.pairwise.clear();
  for (std::size_t i = 0; i < report.methods.size(); ++i) {
    for (std::size_t j = i + 1; j < report.methods.size(); ++j) {
      const auto& a = report.methods[i];
      const auto& b = report.methods[j];
      PairwiseTest t{a.method, b.method, 1.0, 1.0};
      // Infinite PSNR (exact reconstructions) is compared by rank via a
      // large finite stand-in.
      auto finite = [](std::vector<double> v) {
        for (double& x : v) {
          if (std::isinf(x)) x = x > 0 ? 1e300 : -1e300;
        }
        return v;
      };
      t.p_psnr = wilcoxon_signed_rank(finite(a.psnr), finite(b.psnr));
      t.p_ssim = wilcoxon_signed_rank(a.ssim, b.ssim);
      report.pairwise.push_back(t);
    }
  }
}

}  // namespace psfnet
