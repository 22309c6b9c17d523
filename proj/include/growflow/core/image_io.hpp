#pragma once

#include "growflow/core/types.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace growflow {

double srgb_to_linear(double v);
double linear_to_srgb(double v);

// Quantizes a linear [0,1] value to an 8-bit sRGB code (round to nearest).
std::uint8_t encode_srgb8(double linear);

// 8-bit sRGB RGB PNG <-> linear Image. Throws DataError on I/O failure.
Image read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const Image& image);

// 8-bit grayscale PNG; nonzero pixels are foreground.
Mask read_mask_png(const std::filesystem::path& path);
void write_mask_png(const std::filesystem::path& path, const Mask& mask);

// Raw 8-bit sRGB bytes, row-major RGB; the exact payload write_png stores.
std::vector<std::uint8_t> encode_srgb8(const Image& image);

}  // namespace growflow
