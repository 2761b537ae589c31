#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "kakamatch/image.hpp"

namespace kakamatch {

struct OverlayMatch {
  float ax = 0.f, ay = 0.f, asigma = 1.f;
  float bx = 0.f, by = 0.f, bsigma = 1.f;
};

namespace detail {

inline void put_pixel(RgbImage& img, int x, int y, const std::array<std::uint8_t, 3>& color) {
  if (x < 0 || x >= img.width || y < 0 || y >= img.height) return;
  img.at(x, y, 0) = color[0];
  img.at(x, y, 1) = color[1];
  img.at(x, y, 2) = color[2];
}

inline void draw_line(RgbImage& img, int x0, int y0, int x1, int y1,
                      const std::array<std::uint8_t, 3>& color) {
  const int dx = std::abs(x1 - x0);
  const int dy = -std::abs(y1 - y0);
  const int sx = x0 < x1 ? 1 : -1;
  const int sy = y0 < y1 ? 1 : -1;
  int err = dx + dy;
  for (;;) {
    put_pixel(img, x0, y0, color);
    if (x0 == x1 && y0 == y1) break;
    const int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x0 += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y0 += sy;
    }
  }
}

inline void draw_circle(RgbImage& img, int cx, int cy, int radius,
                        const std::array<std::uint8_t, 3>& color) {
  if (radius < 1) radius = 1;
  int x = radius;
  int y = 0;
  int err = 1 - radius;
  while (x >= y) {
    put_pixel(img, cx + x, cy + y, color);
    put_pixel(img, cx + y, cy + x, color);
    put_pixel(img, cx - y, cy + x, color);
    put_pixel(img, cx - x, cy + y, color);
    put_pixel(img, cx - x, cy - y, color);
    put_pixel(img, cx - y, cy - x, color);
    put_pixel(img, cx + y, cy - x, color);
    put_pixel(img, cx + x, cy - y, color);
    ++y;
    if (err < 0) {
      err += 2 * y + 1;
    } else {
      --x;
      err += 2 * (y - x) + 1;
    }
  }
}

inline std::array<std::uint8_t, 3> palette_color(std::size_t i) {
  static constexpr std::array<std::array<std::uint8_t, 3>, 6> kPalette = {{
      {230, 60, 60},
      {60, 180, 75},
      {60, 100, 230},
      {230, 160, 40},
      {170, 60, 200},
      {40, 190, 190},
  }};
  return kPalette[i % kPalette.size()];
}

}  // namespace detail

inline RgbImage gray_to_rgb(const GrayImage& g) {
  RgbImage out(g.width, g.height);
  for (std::size_t i = 0; i < g.data.size(); ++i) {
    const std::uint8_t v = quantize8(g.data[i]);
    out.data[i * 3 + 0] = v;
    out.data[i * 3 + 1] = v;
    out.data[i * 3 + 2] = v;
  }
  return out;
}

// Side-by-side canvas of (wA + wB) x max(hA, hB): keypoint circles with radius
// equal to their scale, and a line per match.
inline RgbImage render_match_overlay(const RgbImage& a, const RgbImage& b,
                                     const std::vector<OverlayMatch>& matches) {
  RgbImage canvas(a.width + b.width, std::max(a.height, b.height));
  for (int y = 0; y < a.height; ++y) {
    for (int x = 0; x < a.width; ++x) {
      for (int c = 0; c < 3; ++c) canvas.at(x, y, c) = a.at(x, y, c);
    }
  }
  for (int y = 0; y < b.height; ++y) {
    for (int x = 0; x < b.width; ++x) {
      for (int c = 0; c < 3; ++c) canvas.at(a.width + x, y, c) = b.at(x, y, c);
    }
  }

  for (std::size_t i = 0; i < matches.size(); ++i) {
    const OverlayMatch& m = matches[i];
    const auto color = detail::palette_color(i);
    const int ax = static_cast<int>(std::lround(m.ax));
    const int ay = static_cast<int>(std::lround(m.ay));
    const int bx = a.width + static_cast<int>(std::lround(m.bx));
    const int by = static_cast<int>(std::lround(m.by));
    detail::draw_circle(canvas, ax, ay, static_cast<int>(std::lround(m.asigma)), color);
    detail::draw_circle(canvas, bx, by, static_cast<int>(std::lround(m.bsigma)), color);
    detail::draw_line(canvas, ax, ay, bx, by, color);
  }
  return canvas;
}

}  // namespace kakamatch
