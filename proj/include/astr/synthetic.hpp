#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "astr/image.hpp"

// Lesion-on-speckle phantoms standing in for clinical endorectal ultrasound video.
namespace astr::harness {

struct SyntheticSpec {
  std::size_t width = 64;
  std::size_t height = 64;
  std::size_t frames = 8;
  double center_x = 30.0;
  double center_y = 34.0;
  double drift_x = 0.5;    // px per frame
  double drift_y = 0.25;
  double axis_a = 10.0;    // horizontal semi-axis
  double axis_b = 7.0;     // vertical semi-axis
  double axis_drift = 0.1;  // added to both semi-axes per frame
  double speckle = 0.3;     // 0 disables noise
  double lesion_contrast = 0.6;  // lesion darkening factor
  ScanMode mode = ScanMode::linear;

  /// Throws ParameterError if any frame's ellipse leaves the image.
  void validate() const;
};

struct SyntheticVideo {
  std::vector<Image> frames;
  std::vector<Image> masks;  // {0, 255}
};

/// Pixel centre (x, y) inside the closed ellipse.
bool inside_ellipse(double x, double y, double cx, double cy, double a, double b);

SyntheticVideo gen_synthetic(const SyntheticSpec& spec, std::uint64_t seed);

/// Smooth radial/angular pattern on a convex-mode canvas, used to exercise the
/// scan conversions. Values stay within [20, 235].
Image band_limited_phantom(std::size_t width, std::size_t height, std::uint64_t seed);

}  // namespace astr::harness
