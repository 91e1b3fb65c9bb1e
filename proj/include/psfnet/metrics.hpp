#pragma once

#include <limits>
#include <map>
#include <string>
#include <vector>

#include "psfnet/tensor.hpp"

namespace psfnet {

// Returned by psnr() for identical images.
inline constexpr double kPsnrIdentical = std::numeric_limits<double>::infinity();

// 20 log10(max(ref) / rmse(recon, ref)) on magnitude images.
double psnr(const RealTensor& recon_mag, const RealTensor& ref_mag);

// Mean local SSIM over all valid 11x11 Gaussian windows (sigma 1.5), with
// K1 = 0.01, K2 = 0.03 and dynamic range max(ref). Images must be at least
// 11x11.
double ssim(const RealTensor& recon_mag, const RealTensor& ref_mag);

// Two-sided Wilcoxon signed-rank test of the paired samples. Zero differences
// are dropped and tied magnitudes get mid-ranks. The null distribution is
// enumerated exactly for up to 20 non-zero differences; larger samples use the
// normal approximation with continuity and tie corrections. Returns 1 when all
// differences are zero.
double wilcoxon_signed_rank(const std::vector<double>& a, const std::vector<double>& b);

// Sum of positive-difference ranks, with mid-ranks for ties.
double wilcoxon_statistic(const std::vector<double>& a, const std::vector<double>& b);

struct MethodScores {
  std::string method;
  std::vector<std::string> scan_ids;
  std::vector<double> psnr;
  std::vector<double> ssim;
};

struct Summary {
  double mean = 0.0;
  double std_error = 0.0;
};
// Mean and standard error; infinite samples propagate to the mean.
Summary summarize(const std::vector<double>& v);

struct PairwiseTest {
  std::string method_a;
  std::string method_b;
  double p_psnr = 1.0;
  double p_ssim = 1.0;
};

struct EvalReport {
  std::vector<MethodScores> methods;
  std::vector<PairwiseTest> pairwise;
};

// Fills the pairwise table for every unordered pair of methods.
void compute_pairwise(EvalReport& report);

}  // namespace psfnet
