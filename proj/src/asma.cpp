#include "astr/asma.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "astr/error.hpp"
#include "astr/numerics.hpp"
#include "astr/random.hpp"

namespace astr::asma {

namespace {

constexpr double kFill = 0.0;

void require_mode(const Image& img, ScanMode expected, const char* op) {
  if (img.mode != expected) {
    throw ContractError(std::string(op) + ": expected a " + std::string(to_string(expected)) +
                        " image, got " + std::string(to_string(img.mode)));
  }
}

double r_step(const PolarGeometry& g) {
  return (g.r_max - g.r_min) / static_cast<double>(g.out_rows - 1);
}

double theta_step(const PolarGeometry& g) {
  return (g.theta_max - g.theta_min) / static_cast<double>(g.out_cols - 1);
}

// Canvas position sampled by linear-image cell (row, col).
struct CanvasPoint {
  double x;
  double y;
};

CanvasPoint cell_to_canvas(const PolarGeometry& g, std::size_t row, std::size_t col) {
  const double r = g.r_min + static_cast<double>(row) * r_step(g);
  const double theta = g.theta_min + static_cast<double>(col) * theta_step(g);
  return {g.origin_x + r * std::cos(theta), g.origin_y + r * std::sin(theta)};
}

struct GridPoint {
  bool inside;
  double row;
  double col;
};

GridPoint canvas_to_cell(const PolarGeometry& g, double x, double y) {
  const double dx = x - g.origin_x;
  const double dy = y - g.origin_y;
  const double r = std::sqrt(dx * dx + dy * dy);
  const double theta = std::atan2(dy, dx);
  if (r < g.r_min || r > g.r_max || theta < g.theta_min || theta > g.theta_max) {
    return {false, 0.0, 0.0};
  }
  return {true, (r - g.r_min) / r_step(g), (theta - g.theta_min) / theta_step(g)};
}

}  // namespace

void PolarGeometry::validate() const {
  auto fail = [](const std::string& why) { throw ParameterError("polar geometry: " + why); };
  if (!(r_min >= 0.0)) fail("r_min must be >= 0");
  if (!(r_max > r_min)) fail("r_max must exceed r_min (degenerate radius range)");
  const double span = theta_max - theta_min;
  if (!(span > 0.0)) fail("theta_max must exceed theta_min (degenerate angle range)");
  if (span > std::numbers::pi + 1e-12) fail("angle range exceeds pi");
  if (out_rows < 2 || out_cols < 2) fail("output grid needs at least 2 rows and 2 columns");
  if (canvas_width == 0 || canvas_height == 0) fail("canvas extents must be positive");
  if (!(origin_x >= 0.0 && origin_x <= static_cast<double>(canvas_width - 1))) {
    fail("apex x lies outside the canvas");
  }
  if (!(origin_y <= static_cast<double>(canvas_height - 1))) fail("apex lies below the canvas");
}

PolarGeometry default_geometry(std::size_t width, std::size_t height) {
  PolarGeometry g;
  const double h = static_cast<double>(height);
  g.origin_x = static_cast<double>(width) / 2.0;
  g.origin_y = 0.0;
  g.r_min = 0.1 * h;
  g.r_max = 0.95 * h;
  g.theta_min = std::numbers::pi / 4.0;
  g.theta_max = 3.0 * std::numbers::pi / 4.0;
  g.out_rows = height;
  g.out_cols = width;
  g.canvas_width = width;
  g.canvas_height = height;
  return g;
}

PolarGeometry oversampled(const PolarGeometry& geom, double factor) {
  if (!(factor > 0.0)) throw ParameterError("oversampling factor must be positive");
  PolarGeometry g = geom;
  const double radial = g.r_max - g.r_min;
  const double arc = g.r_max * (g.theta_max - g.theta_min);
  g.out_rows = static_cast<std::size_t>(std::ceil(factor * radial)) + 1;
  g.out_cols = static_cast<std::size_t>(std::ceil(factor * arc)) + 1;
  return g;
}

Image convex_to_linear(const Image& img, const PolarGeometry& geom) {
  geom.validate();
  require_mode(img, ScanMode::convex, "convex_to_linear");
  if (img.width != geom.canvas_width || img.height != geom.canvas_height) {
    throw DimensionError("convex_to_linear: image is " + std::to_string(img.width) + "x" +
                         std::to_string(img.height) + " but geometry canvas is " +
                         std::to_string(geom.canvas_width) + "x" + std::to_string(geom.canvas_height));
  }
  const Tensor src = to_tensor(img);
  Image out(geom.out_cols, geom.out_rows, ScanMode::linear);
  for (std::size_t i = 0; i < geom.out_rows; ++i) {
    for (std::size_t j = 0; j < geom.out_cols; ++j) {
      const CanvasPoint p = cell_to_canvas(geom, i, j);
      out.at(i, j) = quantize_u8(numerics::bilinear_sample(src, p.y, p.x, kFill));
    }
  }
  return out;
}

Image linear_to_convex(const Image& img, const PolarGeometry& geom) {
  geom.validate();
  require_mode(img, ScanMode::linear, "linear_to_convex");
  if (img.width != geom.out_cols || img.height != geom.out_rows) {
    throw DimensionError("linear_to_convex: image is " + std::to_string(img.width) + "x" +
                         std::to_string(img.height) + " but geometry grid is " +
                         std::to_string(geom.out_cols) + "x" + std::to_string(geom.out_rows));
  }
  const Tensor src = to_tensor(img);
  Image out(geom.canvas_width, geom.canvas_height, ScanMode::convex);
  for (std::size_t y = 0; y < geom.canvas_height; ++y) {
    for (std::size_t x = 0; x < geom.canvas_width; ++x) {
      const GridPoint g = canvas_to_cell(geom, static_cast<double>(x), static_cast<double>(y));
      if (!g.inside) continue;  // already fill
      // Rounding in r/θ can land a hair past the last row/column.
      const double row = std::clamp(g.row, 0.0, static_cast<double>(geom.out_rows - 1));
      const double col = std::clamp(g.col, 0.0, static_cast<double>(geom.out_cols - 1));
      out.at(y, x) = quantize_u8(numerics::bilinear_sample(src, row, col, kFill));
    }
  }
  return out;
}

std::vector<std::uint8_t> fan_mask(const PolarGeometry& geom) {
  geom.validate();
  std::vector<std::uint8_t> mask(geom.canvas_width * geom.canvas_height, 0);
  for (std::size_t y = 0; y < geom.canvas_height; ++y)
    for (std::size_t x = 0; x < geom.canvas_width; ++x)
      mask[y * geom.canvas_width + x] =
          canvas_to_cell(geom, static_cast<double>(x), static_cast<double>(y)).inside ? 1 : 0;
  return mask;
}

std::vector<std::uint8_t> erode(std::span<const std::uint8_t> mask, std::size_t width,
                                std::size_t height, std::size_t radius) {
  if (mask.size() != width * height) throw DimensionError("erode: mask size does not match extents");
  const long r = static_cast<long>(radius);
  const long w = static_cast<long>(width), h = static_cast<long>(height);
  std::vector<std::uint8_t> out(mask.size(), 0);
  for (long y = 0; y < h; ++y) {
    for (long x = 0; x < w; ++x) {
      bool keep = mask[static_cast<std::size_t>(y * w + x)] != 0;
      for (long dy = -r; keep && dy <= r; ++dy) {
        for (long dx = -r; keep && dx <= r; ++dx) {
          const long yy = y + dy, xx = x + dx;
          if (yy < 0 || yy >= h || xx < 0 || xx >= w || !mask[static_cast<std::size_t>(yy * w + xx)]) {
            keep = false;
          }
        }
      }
      out[static_cast<std::size_t>(y * w + x)] = keep ? 1 : 0;
    }
  }
  return out;
}

double roundtrip_error(const Image& img, const PolarGeometry& geom) {
  constexpr std::size_t kErosion = 2;
  Image back;
  std::vector<std::uint8_t> valid;
  std::size_t w = 0, h = 0;
  if (img.mode == ScanMode::convex) {
    back = linear_to_convex(convex_to_linear(img, geom), geom);
    w = geom.canvas_width;
    h = geom.canvas_height;
    valid = fan_mask(geom);
  } else {
    back = convex_to_linear(linear_to_convex(img, geom), geom);
    w = geom.out_cols;
    h = geom.out_rows;
    valid.assign(w * h, 0);
    const double xmax = static_cast<double>(geom.canvas_width - 1);
    const double ymax = static_cast<double>(geom.canvas_height - 1);
    for (std::size_t i = 0; i < h; ++i) {
      for (std::size_t j = 0; j < w; ++j) {
        const CanvasPoint p = cell_to_canvas(geom, i, j);
        valid[i * w + j] = (p.x >= 0.0 && p.x <= xmax && p.y >= 0.0 && p.y <= ymax) ? 1 : 0;
      }
    }
  }
  valid = erode(valid, w, h, kErosion);
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t k = 0; k < valid.size(); ++k) {
    if (!valid[k]) continue;
    sum += std::abs(static_cast<double>(img.pixels[k]) - static_cast<double>(back.pixels[k]));
    ++count;
  }
  if (count == 0) throw ParameterError("roundtrip_error: valid interior region is empty");
  return sum / static_cast<double>(count) / 255.0;
}

PolarGeometry geometry_for_image(const Image& img) {
  return default_geometry(img.width, img.height);
}

std::vector<Image> balance_dataset(std::span<const Image> images, std::uint64_t seed,
                                   const GeometryFor& geometry) {
  if (images.empty()) throw ParameterError("balance_dataset: image list is empty");
  std::vector<std::size_t> linear, convex;
  for (std::size_t i = 0; i < images.size(); ++i)
    (images[i].mode == ScanMode::linear ? linear : convex).push_back(i);

  std::vector<Image> out(images.begin(), images.end());
  const bool convex_major = convex.size() > linear.size();
  std::vector<std::size_t>& major = convex_major ? convex : linear;
  const std::size_t minor_count = convex_major ? linear.size() : convex.size();
  if (major.size() - minor_count <= 1) return out;

  const std::size_t to_convert = major.size() - minor_count;
  Rng rng(seed);
  for (std::size_t i = major.size() - 1; i > 0; --i) {
    std::swap(major[i], major[static_cast<std::size_t>(rng.below(i + 1))]);
  }
  std::vector<std::size_t> chosen(major.begin(), major.begin() + static_cast<long>(to_convert));
  std::sort(chosen.begin(), chosen.end());
  for (std::size_t idx : chosen) {
    const Image& src = images[idx];
    const PolarGeometry g = geometry(src);
    out.push_back(convex_major ? convex_to_linear(src, g) : linear_to_convex(src, g));
  }
  return out;
}

}  // namespace astr::asma
