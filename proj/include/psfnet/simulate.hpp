#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "psfnet/sampling.hpp"
#include "psfnet/tensor.hpp"

namespace psfnet {

// Ellipse in normalized image coordinates: u runs left to right and v bottom
// to top, both spanning [-1, 1] across the grid with (0,0) at pixel (h/2, w/2).
struct Ellipse {
  double cu = 0.0;
  double cv = 0.0;
  double au = 1.0;  // semi-axis along the rotated u direction
  double av = 1.0;  // semi-axis along the rotated v direction
  double angle_deg = 0.0;
  double intensity = 1.0;

  bool contains(double u, double v) const;
};

struct PhantomConfig {
  std::size_t h = 64;
  std::size_t w = 64;
  std::size_t coils = 4;
  std::vector<Ellipse> ellipses;
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

// The ten-ellipse modified Shepp-Logan head.
std::vector<Ellipse> shepp_logan_ellipses();

// Shepp-Logan with jittered geometry and intensities plus a few random small
// features, so that each seed yields a distinct anatomy.
std::vector<Ellipse> random_phantom_ellipses(std::uint64_t seed);

// Normalized coordinates of a pixel center.
double pixel_u(std::size_t x, std::size_t w);
double pixel_v(std::size_t y, std::size_t h);

// Real-valued superposition of ellipse indicators, shape [h,w].
ComplexTensor make_phantom(const PhantomConfig& cfg);

// Smooth complex coil profiles, shape [coils,h,w], with root-sum-of-squares 1
// at every pixel.
ComplexTensor make_sens_maps(std::size_t h, std::size_t w, std::size_t coils, std::uint64_t seed);

struct Scan {
  std::string id;
  ComplexTensor truth_img;  // [z,h,w] sensitivity-weighted coil images
  ComplexTensor sens_maps;  // [z,h,w]
  ComplexTensor full_ksp;   // [z,h,w]
  SamplingMask mask;
  ComplexTensor und_ksp;  // [z,h,w], zero where mask == 0

  std::size_t coils() const { return truth_img.dim(0); }
  std::size_t height() const { return truth_img.dim(1); }
  std::size_t width() const { return truth_img.dim(2); }
};

// und = mask (.) ksp, broadcast over coils.
ComplexTensor apply_mask(const ComplexTensor& ksp, const MaskTensor& mask);

Scan simulate_scan(const ComplexTensor& phantom, const ComplexTensor& sens_maps,
                   const SamplingMask& mask, double noise_sigma, std::uint64_t seed);

// Replaces the mask of a scan and recomputes its undersampled k-space.
Scan remask_scan(Scan scan, SamplingMask mask);

}  // namespace psfnet
