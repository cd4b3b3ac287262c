#include "astr/io.hpp"

#include <png.h>

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

#include "astr/error.hpp"

namespace astr::io {

namespace fs = std::filesystem;

void write_file_atomic(const fs::path& path, std::string_view bytes) {
  std::random_device rd;
  const fs::path tmp = path.string() + ".tmp" + std::to_string(rd());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) {
      out.close();
      std::error_code ec;
      fs::remove(tmp, ec);
      throw IoError("failed writing " + tmp.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError("cannot move temp file into " + path.string());
  }
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Image read_png(const fs::path& path, ScanMode mode) {
  const std::string bytes = read_file(path);
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    throw IoError("cannot decode PNG " + path.string() + ": " + image.message);
  }
  image.format = PNG_FORMAT_GRAY;
  Image img(image.width, image.height, mode);
  if (!png_image_finish_read(&image, nullptr, img.pixels.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw IoError("cannot decode PNG " + path.string() + ": " + msg);
  }
  return img;
}

std::string encode_png(const Image& img) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width);
  image.height = static_cast<png_uint_32>(img.height);
  image.format = PNG_FORMAT_GRAY;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, img.pixels.data(), 0, nullptr)) {
    throw IoError(std::string("PNG encode failed: ") + image.message);
  }
  std::string out(size, '\0');
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, img.pixels.data(), 0, nullptr)) {
    throw IoError(std::string("PNG encode failed: ") + image.message);
  }
  out.resize(size);
  return out;
}

void write_png(const fs::path& path, const Image& img) { write_file_atomic(path, encode_png(img)); }

namespace {

static_assert(std::endian::native == std::endian::little, "weight I/O assumes a little-endian host");

void put_u64(std::string& out, std::uint64_t v) {
  char buf[8];
  std::memcpy(buf, &v, 8);
  out.append(buf, 8);
}

void put_f64(std::string& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  bool done() const { return pos_ == bytes_.size(); }

  std::uint64_t u64() {
    need(8);
    std::uint64_t v;
    std::memcpy(&v, bytes_.data() + pos_, 8);
    pos_ += 8;
    return v;
  }

  double f64() { return std::bit_cast<double>(u64()); }

  std::string text(std::uint64_t n) {
    need(n);
    std::string s(bytes_.substr(pos_, n));
    pos_ += n;
    return s;
  }

 private:
  void need(std::uint64_t n) const {
    if (bytes_.size() - pos_ < n) throw IoError("weight file truncated at byte " + std::to_string(pos_));
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_weights(const WeightRecords& records) {
  std::string out;
  for (const auto& [name, tensor] : records) {
    put_u64(out, name.size());
    out += name;
    put_u64(out, tensor.rank());
    for (auto e : tensor.shape()) put_u64(out, e);
    for (double v : tensor.data()) put_f64(out, v);
  }
  return out;
}

WeightRecords decode_weights(std::string_view bytes) {
  WeightRecords records;
  Reader in(bytes);
  while (!in.done()) {
    const std::uint64_t name_len = in.u64();
    std::string name = in.text(name_len);
    const std::uint64_t rank = in.u64();
    if (rank == 0 || rank > 8) throw IoError("weight record '" + name + "' has invalid rank");
    Shape shape;
    std::uint64_t volume = 1;
    for (std::uint64_t i = 0; i < rank; ++i) {
      shape.push_back(in.u64());
      if (shape.back() == 0 || shape.back() > (bytes.size() / 8)) {
        throw IoError("weight record '" + name + "' has an invalid extent");
      }
      volume *= shape.back();
    }
    if (volume > bytes.size() / 8) throw IoError("weight record '" + name + "' overruns the file");
    std::vector<double> data(volume);
    for (auto& v : data) v = in.f64();
    records.emplace_back(std::move(name), Tensor(std::move(shape), std::move(data)));
  }
  return records;
}

void save_weights(const fs::path& path, const WeightRecords& records) {
  write_file_atomic(path, encode_weights(records));
}

WeightRecords load_weights(const fs::path& path) { return decode_weights(read_file(path)); }

}  // namespace astr::io
