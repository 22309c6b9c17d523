#include "growflow/core/image_io.hpp"

#include "growflow/core/errors.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>

namespace growflow {

double srgb_to_linear(double v) {
  return v <= 0.04045 ? v / 12.92 : std::pow((v + 0.055) / 1.055, 2.4);
}

double linear_to_srgb(double v) {
  v = std::clamp(v, 0.0, 1.0);
  return v <= 0.0031308 ? 12.92 * v : 1.055 * std::pow(v, 1.0 / 2.4) - 0.055;
}

std::uint8_t encode_srgb8(double linear) {
  return static_cast<std::uint8_t>(std::lround(linear_to_srgb(linear) * 255.0));
}

std::vector<std::uint8_t> encode_srgb8(const Image& image) {
  std::vector<std::uint8_t> bytes(image.data().size());
  std::transform(image.data().begin(), image.data().end(), bytes.begin(),
                 [](double v) { return encode_srgb8(v); });
  return bytes;
}

namespace {

std::vector<std::uint8_t> read_png_bytes(const std::filesystem::path& path, png_uint_32 format, int& width,
                                         int& height) {
  png_image img;
  std::memset(&img, 0, sizeof(img));
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str())) {
    throw DataError("cannot read PNG " + path.string() + ": " + img.message);
  }
  img.format = format;
  std::vector<std::uint8_t> buffer(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, buffer.data(), 0, nullptr)) {
    png_image_free(&img);
    throw DataError("cannot decode PNG " + path.string() + ": " + img.message);
  }
  width = static_cast<int>(img.width);
  height = static_cast<int>(img.height);
  return buffer;
}

void write_png_bytes(const std::filesystem::path& path, png_uint_32 format, int width, int height,
                     const std::vector<std::uint8_t>& bytes) {
  png_image img;
  std::memset(&img, 0, sizeof(img));
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(width);
  img.height = static_cast<png_uint_32>(height);
  img.format = format;
  if (!png_image_write_to_file(&img, path.c_str(), 0, bytes.data(), 0, nullptr)) {
    throw DataError("cannot write PNG " + path.string() + ": " + img.message);
  }
}

}  // namespace

Image read_png(const std::filesystem::path& path) {
  int w = 0, h = 0;
  const auto bytes = read_png_bytes(path, PNG_FORMAT_RGB, w, h);
  Image image(w, h);
  auto px = image.data();
  for (std::size_t i = 0; i < bytes.size(); ++i) px[i] = srgb_to_linear(bytes[i] / 255.0);
  return image;
}

void write_png(const std::filesystem::path& path, const Image& image) {
  write_png_bytes(path, PNG_FORMAT_RGB, image.width(), image.height(), encode_srgb8(image));
}

Mask read_mask_png(const std::filesystem::path& path) {
  Mask mask;
  auto bytes = read_png_bytes(path, PNG_FORMAT_GRAY, mask.width, mask.height);
  mask.values.resize(bytes.size());
  std::transform(bytes.begin(), bytes.end(), mask.values.begin(), [](auto b) { return b ? 1 : 0; });
  return mask;
}

void write_mask_png(const std::filesystem::path& path, const Mask& mask) {
  std::vector<std::uint8_t> bytes(mask.values.size());
  std::transform(mask.values.begin(), mask.values.end(), bytes.begin(), [](auto v) { return v ? 255 : 0; });
  write_png_bytes(path, PNG_FORMAT_GRAY, mask.width, mask.height, bytes);
}

}  // namespace growflow
