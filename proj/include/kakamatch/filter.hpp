#pragma once

#include <cmath>
#include <vector>

#include "kakamatch/error.hpp"
#include "kakamatch/image.hpp"

namespace kakamatch {

// 1-D Gaussian sampled at integer offsets over radius ceil(3*sigma),
// normalized to sum 1.
inline std::vector<float> gaussian_kernel(double sigma) {
  if (!(sigma > 0.0)) throw ArgumentError("gaussian_kernel: sigma must be positive");
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<float> kernel(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double v = std::exp(-(static_cast<double>(i) * i) / (2.0 * sigma * sigma));
    kernel[static_cast<std::size_t>(i + radius)] = static_cast<float>(v);
    sum += v;
  }
  for (float& v : kernel) v = static_cast<float>(v / sum);
  return kernel;
}

// Separable Gaussian convolution, clamp-to-edge borders.
inline GrayImage gaussian_blur(const GrayImage& image, double sigma) {
  const std::vector<float> kernel = gaussian_kernel(sigma);
  const int radius = static_cast<int>(kernel.size() / 2);
  const int w = image.width;
  const int h = image.height;

  GrayImage tmp(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      float acc = 0.f;
      for (int i = -radius; i <= radius; ++i) {
        int sx = x + i;
        sx = sx < 0 ? 0 : (sx >= w ? w - 1 : sx);
        acc += kernel[static_cast<std::size_t>(i + radius)] * image.at(sx, y);
      }
      tmp.at(x, y) = acc;
    }
  }
  GrayImage out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      float acc = 0.f;
      for (int i = -radius; i <= radius; ++i) {
        int sy = y + i;
        sy = sy < 0 ? 0 : (sy >= h ? h - 1 : sy);
        acc += kernel[static_cast<std::size_t>(i + radius)] * tmp.at(x, sy);
      }
      out.at(x, y) = acc;
    }
  }
  return out;
}

// Drops to half resolution by taking every second sample; the caller is
// expected to have blurred first (pyramid construction always has).
inline GrayImage downsample_half(const GrayImage& image) {
  if (image.width < 2 || image.height < 2) {
    throw ArgumentError("downsample_half: image must be at least 2x2");
  }
  GrayImage out(image.width / 2, image.height / 2);
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      out.at(x, y) = image.at(2 * x, 2 * y);
    }
  }
  return out;
}

// k x k box mean with clamp-to-edge borders; k must be odd.
inline SoftMask mean_blur(const SoftMask& mask, int k) {
  if (k < 1 || k % 2 == 0) throw ArgumentError("mean_blur: window size must be odd and positive");
  const int radius = k / 2;
  const int w = mask.width;
  const int h = mask.height;
  const float inv = 1.f / (static_cast<float>(k) * k);

  // Separable: horizontal sum pass then vertical.
  std::vector<float> tmp(static_cast<std::size_t>(w) * h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      float acc = 0.f;
      for (int i = -radius; i <= radius; ++i) {
        int sx = x + i;
        sx = sx < 0 ? 0 : (sx >= w ? w - 1 : sx);
        acc += mask.at(sx, y);
      }
      tmp[static_cast<std::size_t>(y) * w + x] = acc;
    }
  }
  SoftMask out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      float acc = 0.f;
      for (int i = -radius; i <= radius; ++i) {
        int sy = y + i;
        sy = sy < 0 ? 0 : (sy >= h ? h - 1 : sy);
        acc += tmp[static_cast<std::size_t>(sy) * w + x];
      }
      float v = acc * inv;
      out.at(x, y) = v < 0.f ? 0.f : (v > 1.f ? 1.f : v);
    }
  }
  return out;
}

// Bilinear intensity lookup with clamp-to-edge; shared by warping and the
// descriptor sampler.
inline float sample_bilinear(const GrayImage& image, float x, float y) {
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const float fx = x - static_cast<float>(x0);
  const float fy = y - static_cast<float>(y0);
  const float v00 = image.at_clamped(x0, y0);
  const float v10 = image.at_clamped(x0 + 1, y0);
  const float v01 = image.at_clamped(x0, y0 + 1);
  const float v11 = image.at_clamped(x0 + 1, y0 + 1);
  return (v00 * (1.f - fx) + v10 * fx) * (1.f - fy) + (v01 * (1.f - fx) + v11 * fx) * fy;
}

// 2x bilinear upsample; output dims are exactly doubled and output(2x,2y)
// reproduces input(x,y).
inline GrayImage upsample_double(const GrayImage& image) {
  GrayImage out(image.width * 2, image.height * 2);
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      out.at(x, y) = sample_bilinear(image, static_cast<float>(x) * 0.5f, static_cast<float>(y) * 0.5f);
    }
  }
  return out;
}

}  // namespace kakamatch
