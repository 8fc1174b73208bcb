#pragma once

#include <xmc/binary_io.hpp>
#include <xmc/error.hpp>
#include <xmc/grad/tensor.hpp>

#include <cctype>
#include <cstdint>
#include <string>
#include <vector>

namespace xmc::data {

// 8-bit interleaved RGB raster.
struct RgbImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;  // (y * width + x) * 3 + channel

  RgbImage() = default;
  RgbImage(std::size_t w, std::size_t h) : width(w), height(h), pixels(w * h * 3, 0) {}

  std::uint8_t* at(std::size_t x, std::size_t y) { return pixels.data() + (y * width + x) * 3; }
  const std::uint8_t* at(std::size_t x, std::size_t y) const { return pixels.data() + (y * width + x) * 3; }
};

inline std::vector<std::uint8_t> encode_ppm(const RgbImage& img) {
  const std::string header = "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), img.pixels.begin(), img.pixels.end());
  return out;
}

// Binary P6 with maxval 255; '#' comments are allowed in the header.
inline RgbImage decode_ppm(const std::vector<std::uint8_t>& bytes, const std::string& what) {
  std::size_t pos = 0;
  auto fail = [&](const std::string& msg) -> FormatError { return FormatError("PPM '" + what + "': " + msg); };
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_uint = [&](const char* field) {
    skip_space();
    if (pos >= bytes.size() || !std::isdigit(bytes[pos])) throw fail(std::string("malformed header field ") + field);
    std::uint64_t v = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      v = v * 10 + static_cast<std::uint64_t>(bytes[pos++] - '0');
      if (v > 1u << 20) throw fail(std::string("header field ") + field + " too large");
    }
    return static_cast<std::size_t>(v);
  };
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6') throw fail("bad magic (expected P6)");
  pos = 2;
  const std::size_t w = read_uint("width");
  const std::size_t h = read_uint("height");
  const std::size_t maxval = read_uint("maxval");
  if (maxval != 255) throw fail("maxval " + std::to_string(maxval) + " unsupported (expected 255)");
  if (w == 0 || h == 0) throw fail("zero image dimension");
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) throw fail("missing whitespace after header");
  ++pos;
  const std::size_t need = w * h * 3;
  if (bytes.size() - pos < need)
    throw fail("truncated pixel data: expected " + std::to_string(need) + " bytes, found " +
               std::to_string(bytes.size() - pos));
  RgbImage img(w, h);
  std::copy(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
            bytes.begin() + static_cast<std::ptrdiff_t>(pos + need), img.pixels.begin());
  return img;
}

inline void save_ppm(const RgbImage& img, const std::string& path) { io::write_file(path, encode_ppm(img)); }
inline RgbImage read_ppm(const std::string& path) { return decode_ppm(io::read_file(path), path); }

// (1 x 3 x H x W) tensor scaled to [0, 1] by /255.
template <class T = float>
grad::Tensor<T> to_tensor(const RgbImage& img) {
  grad::Tensor<T> t({1, 3, img.height, img.width});
  for (std::size_t y = 0; y < img.height; ++y)
    for (std::size_t x = 0; x < img.width; ++x)
      for (std::size_t c = 0; c < 3; ++c) t.at(0, c, y, x) = static_cast<T>(img.at(x, y)[c]) / T(255);
  return t;
}

template <class T = float>
grad::Tensor<T> load_image(const std::string& path, std::size_t expected_size) {
  auto img = read_ppm(path);
  if (expected_size != 0 && (img.width != expected_size || img.height != expected_size))
    throw FormatError("PPM '" + path + "': expected " + std::to_string(expected_size) + "x" +
                      std::to_string(expected_size) + " image, got " + std::to_string(img.width) + "x" +
                      std::to_string(img.height));
  return to_tensor<T>(img);
}

// 8-bit grayscale (P5).
inline std::vector<std::uint8_t> encode_pgm(const std::vector<std::uint8_t>& gray, std::size_t w, std::size_t h) {
  const std::string header = "P5\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), gray.begin(), gray.end());
  return out;
}

}  // namespace xmc::data
