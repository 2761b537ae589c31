#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "kakamatch/error.hpp"

namespace kakamatch {

// Row-major interleaved 8-bit RGB raster.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;  // width * height * 3

  RgbImage() = default;
  RgbImage(int w, int h) : width(w), height(h), data(static_cast<std::size_t>(w) * h * 3, 0) {
    if (w < 1 || h < 1) throw ArgumentError("RgbImage: dimensions must be >= 1");
  }

  std::uint8_t& at(int x, int y, int c) { return data[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
  std::uint8_t at(int x, int y, int c) const { return data[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }

  bool operator==(const RgbImage&) const = default;
};

// Row-major real-valued intensity raster. Images built from 8-bit input hold
// values in [0,1]; pyramid intermediates may drift past the ends by
// convolution rounding only.
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<float> data;  // width * height

  GrayImage() = default;
  GrayImage(int w, int h, float fill = 0.f)
      : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {
    if (w < 1 || h < 1) throw ArgumentError("GrayImage: dimensions must be >= 1");
  }

  float& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
  float at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }

  // Clamp-to-edge fetch, the border rule used by every convolution here.
  float at_clamped(int x, int y) const {
    x = x < 0 ? 0 : (x >= width ? width - 1 : x);
    y = y < 0 ? 0 : (y >= height ? height - 1 : y);
    return at(x, y);
  }

  bool operator==(const GrayImage&) const = default;
};

// Per-pixel weight in [0,1]; dimensions always match the image it localises.
struct SoftMask {
  int width = 0;
  int height = 0;
  std::vector<float> data;

  SoftMask() = default;
  SoftMask(int w, int h, float fill = 0.f)
      : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {
    if (w < 1 || h < 1) throw ArgumentError("SoftMask: dimensions must be >= 1");
  }

  float& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
  float at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }

  bool operator==(const SoftMask&) const = default;
};

// Rec.601 luma. value = (0.299 R + 0.587 G + 0.114 B) / 255.
inline GrayImage to_gray(const RgbImage& image) {
  GrayImage out(image.width, image.height);
  const std::size_t n = static_cast<std::size_t>(image.width) * image.height;
  for (std::size_t i = 0; i < n; ++i) {
    const float r = image.data[i * 3 + 0];
    const float g = image.data[i * 3 + 1];
    const float b = image.data[i * 3 + 2];
    out.data[i] = (0.299f * r + 0.587f * g + 0.114f * b) / 255.f;
  }
  return out;
}

// Half-up quantisation used everywhere a [0,1] value becomes an 8-bit sample.
inline std::uint8_t quantize8(float v) {
  if (!(v > 0.f)) return 0;
  if (v >= 1.f) return 255;
  return static_cast<std::uint8_t>(std::lround(v * 255.f));
}

}  // namespace kakamatch
