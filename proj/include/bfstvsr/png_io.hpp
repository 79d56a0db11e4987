#pragma once

// 8-bit RGB PNG frames <-> [0,1] float grids (libpng).

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "bfstvsr/grid.hpp"

namespace bfstvsr {

class ImageFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f != nullptr) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] inline void png_error_fn(png_structp png, png_const_charp msg) {
  auto* text = static_cast<std::string*>(png_get_error_ptr(png));
  if (text != nullptr) *text = msg;
  png_longjmp(png, 1);
}

inline void png_warning_fn(png_structp, png_const_charp) {}

}  // namespace detail

inline FeatureGrid<float> read_png(const std::filesystem::path& path) {
  detail::FilePtr file(std::fopen(path.string().c_str(), "rb"));
  if (!file) throw std::runtime_error("cannot open '" + path.string() + "'");
  unsigned char sig[8];
  if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw ImageFormatError("'" + path.string() + "' is not a PNG file");
  }
  std::string error;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &error, detail::png_error_fn, detail::png_warning_fn);
  if (png == nullptr) throw std::runtime_error("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  std::vector<unsigned char> pixels;
  std::vector<png_bytep> rows;
  png_uint_32 width = 0;
  png_uint_32 height = 0;
  int bit_depth = 0;
  int color_type = 0;
  volatile bool bad_format = false;
  // No C++ objects with non-trivial destructors are created past setjmp.
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ImageFormatError("'" + path.string() + "': " + error);
  }
  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  png_get_IHDR(png, info, &width, &height, &bit_depth, &color_type, nullptr, nullptr, nullptr);
  if (bit_depth != 8 || color_type != PNG_COLOR_TYPE_RGB) {
    bad_format = true;
  } else {
    pixels.resize(static_cast<std::size_t>(width) * height * 3);
    rows.resize(height);
    for (png_uint_32 y = 0; y < height; ++y) rows[y] = pixels.data() + static_cast<std::size_t>(y) * width * 3;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
  }
  png_destroy_read_struct(&png, &info, nullptr);
  if (bad_format) {
    throw ImageFormatError("'" + path.string() + "': expected 8-bit RGB PNG, got bit depth " +
                           std::to_string(bit_depth) + ", color type " + std::to_string(color_type));
  }
  FeatureGrid<float> out(3, static_cast<int>(height), static_cast<int>(width));
  for (png_uint_32 y = 0; y < height; ++y) {
    for (png_uint_32 x = 0; x < width; ++x) {
      for (int c = 0; c < 3; ++c) {
        out(c, static_cast<int>(y), static_cast<int>(x)) = pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c] / 255.0f;
      }
    }
  }
  return out;
}

/// Round-to-nearest 8-bit quantization of a [0,1] value.
inline std::uint8_t to_u8(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

/// Writes via a temporary sibling and rename.
template <class T>
void write_png(const std::filesystem::path& path, const FeatureGrid<T>& rgb) {
  if (rgb.channels() != 3) throw std::invalid_argument("write_png: expected 3 channels");
  const int h = rgb.height();
  const int w = rgb.width();
  std::vector<unsigned char> pixels(static_cast<std::size_t>(h) * w * 3);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) pixels[(static_cast<std::size_t>(y) * w + x) * 3 + c] = to_u8(rgb(c, y, x));
    }
  }
  auto tmp = path;
  tmp += ".tmp";
  {
    detail::FilePtr file(std::fopen(tmp.string().c_str(), "wb"));
    if (!file) throw std::runtime_error("cannot open '" + tmp.string() + "' for writing");
    std::string error;
    png_structp png =
        png_create_write_struct(PNG_LIBPNG_VER_STRING, &error, detail::png_error_fn, detail::png_warning_fn);
    if (png == nullptr) throw std::runtime_error("png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    std::vector<png_bytep> rows(h);
    for (int y = 0; y < h; ++y) rows[y] = pixels.data() + static_cast<std::size_t>(y) * w * 3;
    if (setjmp(png_jmpbuf(png))) {
      png_destroy_write_struct(&png, &info);
      throw std::runtime_error("writing '" + path.string() + "' failed: " + error);
    }
    png_init_io(png, file.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8, PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
  }
  std::filesystem::rename(tmp, path);
}

/// Raw planar little-endian float32 dump, C x H x W.
template <class T>
void write_float_dump(const std::filesystem::path& path, const FeatureGrid<T>& grid) {
  std::string bytes;
  bytes.reserve(grid.size() * 4);
  for (T v : grid.data()) {
    const auto u = std::bit_cast<std::uint32_t>(static_cast<float>(v));
    for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<char>((u >> (8 * i)) & 0xFFu));
  }
  auto tmp = path;
  tmp += ".tmp";
  {
    detail::FilePtr file(std::fopen(tmp.string().c_str(), "wb"));
    if (!file || std::fwrite(bytes.data(), 1, bytes.size(), file.get()) != bytes.size()) {
      throw std::runtime_error("cannot write '" + tmp.string() + "'");
    }
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace bfstvsr
