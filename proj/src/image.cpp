#include "astr/image.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "astr/error.hpp"

namespace astr {

std::string_view to_string(ScanMode mode) {
  return mode == ScanMode::linear ? "linear" : "convex";
}

ScanMode parse_scan_mode(std::string_view text) {
  if (text == "linear") return ScanMode::linear;
  if (text == "convex") return ScanMode::convex;
  throw ParameterError("unknown scan mode '" + std::string(text) + "' (expected linear|convex)");
}

std::uint8_t quantize_u8(double v) {
  const double r = std::round(v);  // std::round rounds half away from zero
  return static_cast<std::uint8_t>(std::clamp(r, 0.0, 255.0));
}

Tensor to_tensor(const Image& img) {
  std::vector<double> data(img.pixels.begin(), img.pixels.end());
  return Tensor({img.height, img.width}, std::move(data));
}

Tensor to_unit_tensor(const Image& img) {
  Tensor t = to_tensor(img);
  for (auto& v : t.data()) v /= 255.0;
  return t;
}

Image from_tensor(const Tensor& t, ScanMode mode) {
  if (t.rank() != 2) throw DimensionError("from_tensor: expected h x w, got " + shape_string(t.shape()));
  Image img(t.extent(1), t.extent(0), mode);
  for (std::size_t i = 0; i < t.size(); ++i) img.pixels[i] = quantize_u8(t[i]);
  return img;
}

Image from_unit_tensor(const Tensor& t, ScanMode mode) {
  Tensor scaled = t;
  for (auto& v : scaled.data()) v *= 255.0;
  return from_tensor(scaled, mode);
}

}  // namespace astr
