#include "lseg/io.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <vector>

#include "lseg/errors.hpp"

namespace lseg {
namespace {

struct FileCloser {
  void operator()(FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

FilePtr open_file(const std::string& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw DataError("cannot open file: " + path);
  return f;
}

struct PngGray {
  int h = 0, w = 0;
  int bit_depth = 0;
  std::vector<uint16_t> px;  // 8-bit data widened to u16
};

PngGray read_png_gray(const std::string& path) {
  FilePtr f = open_file(path, "rb");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw DataError("libpng init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw DataError("libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("failed to decode PNG: " + path);
  }
  png_init_io(png, f.get());
  png_read_info(png, info);

  png_uint_32 w = 0, h = 0;
  int bit_depth = 0, color_type = 0;
  png_get_IHDR(png, info, &w, &h, &bit_depth, &color_type, nullptr, nullptr, nullptr);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (color_type == PNG_COLOR_TYPE_RGB || color_type == PNG_COLOR_TYPE_RGB_ALPHA ||
      color_type == PNG_COLOR_TYPE_PALETTE) {
    png_set_rgb_to_gray_fixed(png, 1, -1, -1);
  }
  if (bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (bit_depth == 16) png_set_swap(png);  // host is little-endian
  png_read_update_info(png, info);

  PngGray out;
  out.h = static_cast<int>(h);
  out.w = static_cast<int>(w);
  out.bit_depth = (bit_depth == 16) ? 16 : 8;
  out.px.resize(static_cast<size_t>(h) * w);

  std::vector<png_bytep> rows(h);
  std::vector<uint8_t> buf8;
  if (out.bit_depth == 16) {
    for (png_uint_32 y = 0; y < h; ++y)
      rows[y] = reinterpret_cast<png_bytep>(out.px.data() + static_cast<size_t>(y) * w);
  } else {
    buf8.resize(static_cast<size_t>(h) * w);
    for (png_uint_32 y = 0; y < h; ++y) rows[y] = buf8.data() + static_cast<size_t>(y) * w;
  }
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  if (out.bit_depth == 8)
    for (size_t i = 0; i < buf8.size(); ++i) out.px[i] = buf8[i];
  return out;
}

void write_png_gray16(const std::string& path, int h, int w, const std::vector<uint16_t>& px) {
  FilePtr f = open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw DataError("libpng init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw DataError("libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw DataError("failed to encode PNG: " + path);
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, w, h, 16, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_set_swap(png);
  std::vector<png_bytep> rows(h);
  for (int y = 0; y < h; ++y)
    rows[y] = reinterpret_cast<png_bytep>(const_cast<uint16_t*>(px.data() + static_cast<size_t>(y) * w));
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

void write_png_8(const std::string& path, int h, int w, const uint8_t* data, int color_type) {
  FilePtr f = open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw DataError("libpng init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw DataError("libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw DataError("failed to encode PNG: " + path);
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, w, h, 8, color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  int stride = (color_type == PNG_COLOR_TYPE_RGB) ? 3 * w : w;
  std::vector<png_bytep> rows(h);
  for (int y = 0; y < h; ++y)
    rows[y] = const_cast<png_bytep>(data + static_cast<size_t>(y) * stride);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

constexpr char kLseg1Magic[5] = {'L', 'S', 'E', 'G', '1'};
constexpr double kHuOffset = 32768.0;

}  // namespace

ImageF read_image_hu(const std::string& path) {
  std::ifstream probe(path, std::ios::binary);
  if (!probe) throw DataError("cannot open file: " + path);
  char magic[5] = {};
  probe.read(magic, 5);
  probe.close();
  if (std::memcmp(magic, kLseg1Magic, 5) == 0) return read_lseg1(path);

  PngGray g = read_png_gray(path);
  ImageF img(g.h, g.w);
  if (g.bit_depth == 16) {
    for (size_t i = 0; i < g.px.size(); ++i) img.v[i] = static_cast<double>(g.px[i]) - kHuOffset;
  } else {
    // 8-bit inputs are taken as already-windowed intensities, not HU.
    for (size_t i = 0; i < g.px.size(); ++i) img.v[i] = static_cast<double>(g.px[i]);
  }
  return img;
}

void write_image_hu_png(const std::string& path, const ImageF& hu) {
  std::vector<uint16_t> px(hu.size());
  for (size_t i = 0; i < hu.size(); ++i) {
    double v = std::round(hu.v[i] + kHuOffset);
    if (v < 0) v = 0;
    if (v > 65535) v = 65535;
    px[i] = static_cast<uint16_t>(v);
  }
  write_png_gray16(path, hu.h, hu.w, px);
}

ImageF read_lseg1(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open file: " + path);
  char magic[5] = {};
  f.read(magic, 5);
  if (!f || std::memcmp(magic, kLseg1Magic, 5) != 0)
    throw DataError("not an LSEG1 container: " + path);
  uint32_t h = 0, w = 0;
  f.read(reinterpret_cast<char*>(&h), 4);
  f.read(reinterpret_cast<char*>(&w), 4);
  if (!f || h == 0 || w == 0 || h > (1u << 20) || w > (1u << 20))
    throw DataError("bad LSEG1 header: " + path);
  std::vector<float> buf(static_cast<size_t>(h) * w);
  f.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size() * 4));
  if (!f) throw DataError("truncated LSEG1 payload: " + path);
  ImageF img(static_cast<int>(h), static_cast<int>(w));
  for (size_t i = 0; i < buf.size(); ++i) img.v[i] = buf[i];
  return img;
}

void write_lseg1(const std::string& path, const ImageF& img) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot open file for writing: " + path);
  f.write(kLseg1Magic, 5);
  uint32_t h = static_cast<uint32_t>(img.h), w = static_cast<uint32_t>(img.w);
  f.write(reinterpret_cast<const char*>(&h), 4);
  f.write(reinterpret_cast<const char*>(&w), 4);
  std::vector<float> buf(img.size());
  for (size_t i = 0; i < img.size(); ++i) buf[i] = static_cast<float>(img.v[i]);
  f.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * 4));
  if (!f) throw DataError("failed writing LSEG1: " + path);
}

MaskU8 read_mask_png(const std::string& path) {
  PngGray g = read_png_gray(path);
  double scale = (g.bit_depth == 16) ? 1.0 / 257.0 : 1.0;
  MaskU8 m(g.h, g.w);
  for (size_t i = 0; i < g.px.size(); ++i)
    m.v[i] = (g.px[i] * scale >= 128.0) ? 255 : 0;
  return m;
}

void write_mask_png(const std::string& path, const MaskU8& mask) {
  write_png_8(path, mask.h, mask.w, mask.v.data(), PNG_COLOR_TYPE_GRAY);
}

void write_rgb_png(const std::string& path, int h, int w, const std::vector<uint8_t>& rgb) {
  if (rgb.size() != static_cast<size_t>(h) * w * 3)
    throw DataError("rgb buffer size mismatch for " + path);
  write_png_8(path, h, w, rgb.data(), PNG_COLOR_TYPE_RGB);
}

}  // namespace lseg
