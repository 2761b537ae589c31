#pragma once

// Shared test utilities: seeded texture synthesis, similarity warps, and
// brute-force reference implementations used as oracles.

#include <unistd.h>

#include <atomic>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "kakamatch/filter.hpp"
#include "kakamatch/image.hpp"
#include "kakamatch/rng.hpp"
#include "kakamatch/sift.hpp"

namespace testsupport {

using kakamatch::GrayImage;
using kakamatch::Rng;

// Unique scratch directory, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("kakamatch_test_" + tag + "_" + std::to_string(counter.fetch_add(1)) + "_" +
             std::to_string(static_cast<unsigned>(::getpid())));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

// Smooth random texture: soft discs and bars over a mid-gray field. Gives
// SIFT plenty of stable blob-like structure.
inline GrayImage textured_image(int width, int height, std::uint64_t seed, int blobs = 60) {
  GrayImage img(width, height, 0.5f);
  Rng rng(seed);
  for (int b = 0; b < blobs; ++b) {
    const double cx = rng.next_range(4.0, width - 4.0);
    const double cy = rng.next_range(4.0, height - 4.0);
    const double radius = rng.next_range(2.0, 9.0);
    const double tone = rng.next_range(0.05, 0.95);
    const int x0 = std::max(0, static_cast<int>(cx - radius - 2));
    const int x1 = std::min(width - 1, static_cast<int>(cx + radius + 2));
    const int y0 = std::max(0, static_cast<int>(cy - radius - 2));
    const int y1 = std::min(height - 1, static_cast<int>(cy + radius + 2));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const double d = std::hypot(x - cx, y - cy);
        double t = (radius - d) / 1.5 + 0.5;
        t = t < 0.0 ? 0.0 : (t > 1.0 ? 1.0 : t);
        t = t * t * (3.0 - 2.0 * t);
        img.at(x, y) = static_cast<float>(img.at(x, y) * (1.0 - t) + tone * t);
      }
    }
  }
  return img;
}

// Rotates the image about its centre by `angle` radians (same canvas size,
// bilinear sampling, out-of-range reads clamp to the edge).
inline GrayImage rotate_about_center(const GrayImage& img, double angle) {
  GrayImage out(img.width, img.height);
  const double cx = (img.width - 1) / 2.0;
  const double cy = (img.height - 1) / 2.0;
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      // inverse map: source = R(-angle) * (dst - centre) + centre
      const double dx = x - cx;
      const double dy = y - cy;
      const double sx = c * dx + s * dy + cx;
      const double sy = -s * dx + c * dy + cy;
      out.at(x, y) = kakamatch::sample_bilinear(img, static_cast<float>(sx), static_cast<float>(sy));
    }
  }
  return out;
}

// Forward map matching rotate_about_center: where a source pixel lands in the
// rotated image.
inline void rotate_forward(double x, double y, int width, int height, double angle, double& ox,
                           double& oy) {
  const double cx = (width - 1) / 2.0;
  const double cy = (height - 1) / 2.0;
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  const double dx = x - cx;
  const double dy = y - cy;
  ox = c * dx - s * dy + cx;
  oy = s * dx + c * dy + cy;
}

// Direct dense 2-D Gaussian convolution (clamp-to-edge), the oracle for the
// separable implementation.
inline GrayImage gaussian_blur_2d_reference(const GrayImage& img, double sigma) {
  const auto kernel1d = kakamatch::gaussian_kernel(sigma);
  const int radius = static_cast<int>(kernel1d.size() / 2);
  GrayImage out(img.width, img.height);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      double acc = 0.0;
      for (int ky = -radius; ky <= radius; ++ky) {
        for (int kx = -radius; kx <= radius; ++kx) {
          acc += static_cast<double>(kernel1d[static_cast<std::size_t>(kx + radius)]) *
                 kernel1d[static_cast<std::size_t>(ky + radius)] * img.at_clamped(x + kx, y + ky);
        }
      }
      out.at(x, y) = static_cast<float>(acc);
    }
  }
  return out;
}

// Exhaustive 26-neighbour scan over a DoG pyramid, the oracle for
// detect_extrema.
inline std::vector<kakamatch::ExtremumCandidate> detect_extrema_reference(
    const kakamatch::DoGPyramid& dog) {
  std::vector<kakamatch::ExtremumCandidate> out;
  for (std::size_t o = 0; o < dog.octaves.size(); ++o) {
    const auto& levels = dog.octaves[o];
    for (int l = 1; l + 1 < static_cast<int>(levels.size()); ++l) {
      const auto& cur = levels[static_cast<std::size_t>(l)];
      for (int y = 1; y + 1 < cur.height; ++y) {
        for (int x = 1; x + 1 < cur.width; ++x) {
          const float v = cur.at(x, y);
          int greater = 0;
          int less = 0;
          for (int dl = -1; dl <= 1; ++dl) {
            for (int dy = -1; dy <= 1; ++dy) {
              for (int dx = -1; dx <= 1; ++dx) {
                if (dl == 0 && dy == 0 && dx == 0) continue;
                const float n = levels[static_cast<std::size_t>(l + dl)].at(x + dx, y + dy);
                if (v > n) ++greater;
                if (v < n) ++less;
              }
            }
          }
          if (greater == 26 || less == 26) out.push_back({static_cast<int>(o), l, x, y});
        }
      }
    }
  }
  return out;
}

}  // namespace testsupport
