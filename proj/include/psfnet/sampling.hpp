#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "psfnet/tensor.hpp"

namespace psfnet {

enum class MaskPattern { kVariable, kUniform };

std::string_view to_string(MaskPattern p);
MaskPattern parse_mask_pattern(std::string_view s);

// Fully sampled rectangle in central k-space.
struct CalibWindow {
  std::size_t h0 = 0;
  std::size_t w0 = 0;
  std::size_t ch = 0;
  std::size_t cw = 0;

  bool contains(std::size_t y, std::size_t x) const noexcept {
    return y >= h0 && y < h0 + ch && x >= w0 && x < w0 + cw;
  }
  std::size_t count() const noexcept { return ch * cw; }

  bool operator==(const CalibWindow&) const = default;
};

// Centered calib_size x calib_size window on an h x w grid.
CalibWindow centered_calib_window(std::size_t h, std::size_t w, std::size_t calib_size);

// Disjoint partition of the acquired samples for self-supervised training.
struct MaskSplit {
  MaskTensor dc_mask;
  MaskTensor loss_mask;
};

struct SamplingMask {
  MaskTensor mask;  // [h,w], 1 = acquired
  CalibWindow calib;
  double accel_target = 1.0;
  MaskPattern pattern = MaskPattern::kVariable;
  std::uint64_t seed = 0;
  std::optional<MaskSplit> split;

  std::size_t height() const { return mask.dim(0); }
  std::size_t width() const { return mask.dim(1); }
  std::size_t acquired() const;
  double achieved_acceleration() const;

  // Entries the forward model treats as data-consistent: the split's dc_mask
  // when present, the full mask otherwise.
  const MaskTensor& dc_set() const { return split ? split->dc_mask : mask; }
};

// Per-location sampling probabilities used by make_mask. The calibration
// window carries probability 1; the remaining density is scaled by bisection
// so that the expected sample count equals h*w/R.
RealTensor sampling_density(std::size_t h, std::size_t w, double accel, MaskPattern pattern,
                            std::size_t calib_size);

SamplingMask make_mask(std::size_t h, std::size_t w, double accel, MaskPattern pattern,
                       std::size_t calib_size, std::uint64_t seed);

SamplingMask split_for_selfsup(const SamplingMask& mask, double loss_frac, std::uint64_t seed);

// Throws ConfigError when the split is not a disjoint cover of the mask.
void validate_split(const SamplingMask& mask);

}  // namespace psfnet
