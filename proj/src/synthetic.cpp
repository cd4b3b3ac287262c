#include "astr/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "astr/error.hpp"
#include "astr/random.hpp"

namespace astr::harness {

void SyntheticSpec::validate() const {
  if (width < 2 || height < 2 || frames < 1) throw ParameterError("synthetic: extents >= 2 and frames >= 1 required");
  if (!(speckle >= 0.0 && speckle <= 1.0)) throw ParameterError("synthetic: speckle must lie in [0,1]");
  if (!(lesion_contrast >= 0.0 && lesion_contrast <= 1.0)) {
    throw ParameterError("synthetic: lesion contrast must lie in [0,1]");
  }
  for (std::size_t k = 0; k < frames; ++k) {
    const double t = static_cast<double>(k);
    const double cx = center_x + drift_x * t, cy = center_y + drift_y * t;
    const double a = axis_a + axis_drift * t, b = axis_b + axis_drift * t;
    if (!(a > 0.0 && b > 0.0)) throw ParameterError("synthetic: ellipse axes must stay positive");
    if (cx - a < 0.0 || cy - b < 0.0 || cx + a > static_cast<double>(width - 1) ||
        cy + b > static_cast<double>(height - 1)) {
      throw ParameterError("synthetic: lesion leaves the frame at frame " + std::to_string(k));
    }
  }
}

bool inside_ellipse(double x, double y, double cx, double cy, double a, double b) {
  const double u = (x - cx) / a, v = (y - cy) / b;
  return u * u + v * v <= 1.0;
}

SyntheticVideo gen_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(seed);
  SyntheticVideo video;
  const double hm1 = static_cast<double>(spec.height - 1);
  for (std::size_t k = 0; k < spec.frames; ++k) {
    const double t = static_cast<double>(k);
    const double cx = spec.center_x + spec.drift_x * t, cy = spec.center_y + spec.drift_y * t;
    const double a = spec.axis_a + spec.axis_drift * t, b = spec.axis_b + spec.axis_drift * t;
    Image frame(spec.width, spec.height, spec.mode);
    Image mask(spec.width, spec.height, spec.mode);
    for (std::size_t y = 0; y < spec.height; ++y) {
      for (std::size_t x = 0; x < spec.width; ++x) {
        double v = 70.0 + 110.0 * static_cast<double>(y) / hm1;
        const bool lesion = inside_ellipse(static_cast<double>(x), static_cast<double>(y), cx, cy, a, b);
        if (lesion) v *= 1.0 - spec.lesion_contrast;
        if (spec.speckle > 0.0) v *= 1.0 - spec.speckle + spec.speckle * rng.exponential();
        frame.at(y, x) = quantize_u8(v);
        mask.at(y, x) = lesion ? 255 : 0;
      }
    }
    video.frames.push_back(std::move(frame));
    video.masks.push_back(std::move(mask));
  }
  return video;
}

Image band_limited_phantom(std::size_t width, std::size_t height, std::uint64_t seed) {
  Rng rng(seed);
  constexpr int kTerms = 4;
  double fx[kTerms], fy[kTerms], phase[kTerms], amp[kTerms];
  for (int i = 0; i < kTerms; ++i) {
    // At most ~3 cycles across the canvas.
    fx[i] = rng.uniform(0.2, 3.0) / static_cast<double>(width);
    fy[i] = rng.uniform(0.2, 3.0) / static_cast<double>(height);
    phase[i] = rng.uniform(0.0, 2.0 * std::numbers::pi);
    amp[i] = rng.uniform(10.0, 25.0);
  }
  Image img(width, height, ScanMode::convex);
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      double v = 128.0;
      for (int i = 0; i < kTerms; ++i) {
        v += amp[i] * std::sin(2.0 * std::numbers::pi * (fx[i] * static_cast<double>(x) + fy[i] * static_cast<double>(y)) + phase[i]);
      }
      img.at(y, x) = quantize_u8(std::clamp(v, 20.0, 235.0));
    }
  }
  return img;
}

}  // namespace astr::harness
