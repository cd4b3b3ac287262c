#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "astr/image.hpp"
#include "astr/tensor.hpp"

namespace astr::io {

/// Writes through a sibling temp file and renames on success, so a failed
/// write never leaves a partial file at `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

std::string read_file(const std::filesystem::path& path);

/// 8-bit grayscale PNG. Colour or 16-bit inputs are converted to 8-bit gray.
Image read_png(const std::filesystem::path& path, ScanMode mode = ScanMode::linear);
std::string encode_png(const Image& img);
void write_png(const std::filesystem::path& path, const Image& img);

/// Named tensors in file order.
using WeightRecords = std::vector<std::pair<std::string, Tensor>>;

/// Record layout, little-endian: u64 name length, UTF-8 name, u64 extent
/// count, u64 extents, f64 values. Records repeat until end of file.
std::string encode_weights(const WeightRecords& records);
WeightRecords decode_weights(std::string_view bytes);
void save_weights(const std::filesystem::path& path, const WeightRecords& records);
WeightRecords load_weights(const std::filesystem::path& path);

}  // namespace astr::io
