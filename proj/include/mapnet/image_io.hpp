#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "mapnet/tensor.hpp"

namespace mapnet {

// 8-bit raster; pixels interleaved row-major, channels 1 (PGM) or 3 (PPM).
struct RawImage {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<std::uint8_t> pixels;

  friend bool operator==(const RawImage&, const RawImage&) = default;
};

// Binary P5/P6 with maxval 255. The header is "P5\n<w> <h>\n255\n".
std::vector<std::uint8_t> encode_pnm(const RawImage& img);
// Accepts any whitespace and '#' comments between header fields, then
// exactly one whitespace byte before the payload. Bad magic or maxval throws
// FormatError; a payload of the wrong length throws CorruptionError.
RawImage decode_pnm(const std::vector<std::uint8_t>& bytes);

void write_pnm(const std::filesystem::path& path, const RawImage& img);
RawImage read_pnm(const std::filesystem::path& path);

// (1,c,h,w) values in [0,1] -> round(v*255) after clamping.
RawImage to_raw(const Tensor<float>& t);
// Inverse of to_raw: byte/255 in a (1,c,h,w) tensor.
Tensor<float> from_raw(const RawImage& img);
// Binary mask (1,1,h,w) -> 0/255 bytes (positive iff value > 0.5).
RawImage mask_to_raw(const Tensor<float>& mask);
// Requires every byte to be 0 or 255 (DataError otherwise).
Tensor<float> mask_from_raw(const RawImage& img);

}  // namespace mapnet
