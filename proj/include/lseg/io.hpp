#pragma once

#include <string>

#include "lseg/array2.hpp"

namespace lseg {

// Lesion images on disk are either 16-bit single-channel PNG storing
// HU + 32768, or a raw float container: magic "LSEG1", u32 height,
// u32 width, f32 row-major, all little-endian. Masks are 8-bit PNG with
// 0 = background, 255 = lesion.

// Sniffs the magic bytes and returns intensities in HU.
ImageF read_image_hu(const std::string& path);

void write_image_hu_png(const std::string& path, const ImageF& hu);

ImageF read_lseg1(const std::string& path);
void write_lseg1(const std::string& path, const ImageF& img);

// 8-bit grayscale; values >= 128 load as 255, the rest as 0.
MaskU8 read_mask_png(const std::string& path);
void write_mask_png(const std::string& path, const MaskU8& mask);

// Interleaved RGB, 3 bytes per pixel, row-major.
void write_rgb_png(const std::string& path, int h, int w, const std::vector<uint8_t>& rgb);

}  // namespace lseg
