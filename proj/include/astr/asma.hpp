#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "astr/image.hpp"

// Scanning-mode augmentation: resampling between fan-shaped (convex-array)
// and rectangular (linear-array) ultrasound frames.
namespace astr::asma {

/// Fan geometry on the convex canvas and the (r, θ) grid of the linear image.
///
/// The apex (origin_x, origin_y) is in canvas pixel coordinates, x to the
/// right and y down. θ is measured from the canvas top-edge x-axis, so
/// θ = π/2 points straight down. Rows of the linear image sample r and columns
/// sample θ, both inclusive of the range ends.
///
/// The polar pole (r_o, θ_o) is the apex itself; it carries no separate value.
struct PolarGeometry {
  double origin_x = 0.0;
  double origin_y = 0.0;
  double r_min = 0.0;
  double r_max = 1.0;
  double theta_min = 0.0;
  double theta_max = 1.0;
  std::size_t out_rows = 2;
  std::size_t out_cols = 2;
  std::size_t canvas_width = 1;
  std::size_t canvas_height = 1;

  /// Throws ParameterError on degenerate or out-of-range values.
  void validate() const;

  friend bool operator==(const PolarGeometry&, const PolarGeometry&) = default;
};

/// θ ∈ [π/4, 3π/4], r ∈ [0.1·h, 0.95·h], apex (w/2, 0), output grid = canvas extents.
PolarGeometry default_geometry(std::size_t width, std::size_t height);

/// Copy of `geom` whose (r, θ) grid spacing is at most 1/factor px along r and
/// along the outermost arc.
PolarGeometry oversampled(const PolarGeometry& geom, double factor);

Image convex_to_linear(const Image& img, const PolarGeometry& geom);
Image linear_to_convex(const Image& img, const PolarGeometry& geom);

/// Canvas pixels whose (r, θ) falls inside the fan (row-major, canvas extents).
std::vector<std::uint8_t> fan_mask(const PolarGeometry& geom);

/// Removes every mask cell with an unset cell (or the grid border) within
/// Chebyshev distance `radius`.
std::vector<std::uint8_t> erode(std::span<const std::uint8_t> mask, std::size_t width,
                                std::size_t height, std::size_t radius);

/// Mean absolute error in [0,1] units between `img` and its two-way converted
/// copy, over the valid region eroded by 2 px. Works for either mode.
double roundtrip_error(const Image& img, const PolarGeometry& geom);

using GeometryFor = std::function<PolarGeometry(const Image&)>;

/// Geometry used by balance_dataset when none is supplied: default_geometry
/// of the image's own extents.
PolarGeometry geometry_for_image(const Image& img);

/// Appends seeded conversions of majority-mode images until both modes have
/// equal counts. Inputs whose counts already differ by at most one are
/// returned unchanged.
std::vector<Image> balance_dataset(std::span<const Image> images, std::uint64_t seed,
                                   const GeometryFor& geometry = geometry_for_image);

}  // namespace astr::asma
