#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

#include "astr/tensor.hpp"

namespace astr {

enum class ScanMode { linear, convex };

std::string_view to_string(ScanMode mode);
ScanMode parse_scan_mode(std::string_view text);

/// 8-bit grayscale raster, row-major.
struct Image {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;
  ScanMode mode = ScanMode::linear;

  Image() = default;
  Image(std::size_t w, std::size_t h, ScanMode m, std::uint8_t fill = 0)
      : width(w), height(h), pixels(w * h, fill), mode(m) {}

  std::uint8_t& at(std::size_t y, std::size_t x) { return pixels[y * width + x]; }
  std::uint8_t at(std::size_t y, std::size_t x) const { return pixels[y * width + x]; }

  friend bool operator==(const Image&, const Image&) = default;
};

/// Round half away from zero, then clamp to [0, 255].
std::uint8_t quantize_u8(double v);

/// h×w tensor holding raw gray levels (0..255).
Tensor to_tensor(const Image& img);
/// h×w tensor scaled to [0,1].
Tensor to_unit_tensor(const Image& img);
/// Quantizes an h×w tensor of gray levels.
Image from_tensor(const Tensor& t, ScanMode mode);
/// Quantizes an h×w tensor in [0,1] as round(255·v).
Image from_unit_tensor(const Tensor& t, ScanMode mode);

}  // namespace astr
