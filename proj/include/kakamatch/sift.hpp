#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "kakamatch/error.hpp"
#include "kakamatch/filter.hpp"
#include "kakamatch/image.hpp"

namespace kakamatch {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

// Gaussian pyramid: octaves of (intervals + 3) images; within an octave image
// i carries blur base_sigma * k^i with k = 2^(1/intervals), and each octave
// halves the previous octave's dimensions.
struct ScaleSpace {
  std::vector<std::vector<GrayImage>> octaves;
  double base_sigma = 1.6;
  int intervals = 3;

  double k_factor() const { return std::pow(2.0, 1.0 / intervals); }
};

// Adjacent-pair differences of the Gaussian pyramid: (intervals + 2) images
// per octave.
struct DoGPyramid {
  std::vector<std::vector<GrayImage>> octaves;
  int intervals = 3;
};

struct Keypoint {
  float x = 0.f;  // subpixel, base-image pixels
  float y = 0.f;
  int octave = 0;
  float interval = 0.f;     // refined scale index within the octave
  float sigma = 0.f;        // absolute scale in base-image pixels
  float orientation = 0.f;  // radians in [0, 2*pi)
  float response = 0.f;     // |DoG| at the refined extremum
};

struct Descriptor {
  std::array<float, 128> values{};
};

struct Feature {
  Keypoint keypoint;
  Descriptor descriptor;
};

// Integer-grid extremum candidate, in octave-local coordinates.
struct ExtremumCandidate {
  int octave = 0;
  int level = 0;  // DoG level index, 1..intervals
  int x = 0;
  int y = 0;
};

struct SiftConfig {
  double sigma0 = 1.6;          // blur of the first pyramid image
  int intervals = 3;            // scale samples per octave doubling
  double assumed_blur = 0.5;    // blur already present in the input
  double contrast_thresh = 0.03;
  double edge_ratio = 10.0;
  int n_octaves = 0;            // 0 = derive from image size (min dim limit 16)
  bool upsample = false;        // start from a 2x bilinear upsample
};

inline int auto_octave_count(int width, int height) {
  const int min_dim = std::min(width, height);
  if (min_dim < 16) return 0;
  return static_cast<int>(std::floor(std::log2(static_cast<double>(min_dim) / 16.0))) + 1;
}

// Builds the Gaussian pyramid. The first image reaches blur sigma0 by an
// incremental blur on top of the input's assumed blur; every next octave is
// seeded by downsampling the image whose blur is 2*sigma0.
inline ScaleSpace build_scale_space(const GrayImage& image, double sigma0, int intervals,
                                    int n_octaves = 0, double assumed_blur = 0.5) {
  if (!(sigma0 > 0.0)) throw ArgumentError("build_scale_space: sigma0 must be positive");
  if (intervals < 1) throw ArgumentError("build_scale_space: intervals must be >= 1");
  if (image.width < 16 || image.height < 16) {
    throw ArgumentError("build_scale_space: image must be at least 16x16");
  }

  const int max_octaves = auto_octave_count(image.width, image.height);
  if (n_octaves <= 0 || n_octaves > max_octaves) n_octaves = max_octaves;

  ScaleSpace ss;
  ss.base_sigma = sigma0;
  ss.intervals = intervals;
  ss.octaves.reserve(static_cast<std::size_t>(n_octaves));

  const double k = ss.k_factor();
  const int per_octave = intervals + 3;

  GrayImage base;
  const double delta0 = sigma0 * sigma0 - assumed_blur * assumed_blur;
  base = delta0 > 1e-12 ? gaussian_blur(image, std::sqrt(delta0)) : image;

  for (int o = 0; o < n_octaves; ++o) {
    std::vector<GrayImage> octave;
    octave.reserve(static_cast<std::size_t>(per_octave));
    octave.push_back(o == 0 ? std::move(base) : downsample_half(ss.octaves.back()[static_cast<std::size_t>(intervals)]));
    for (int i = 1; i < per_octave; ++i) {
      const double prev = sigma0 * std::pow(k, i - 1);
      const double next = sigma0 * std::pow(k, i);
      octave.push_back(gaussian_blur(octave.back(), std::sqrt(next * next - prev * prev)));
    }
    ss.octaves.push_back(std::move(octave));
  }
  return ss;
}

inline DoGPyramid build_dog(const ScaleSpace& ss) {
  DoGPyramid dog;
  dog.intervals = ss.intervals;
  dog.octaves.reserve(ss.octaves.size());
  for (const auto& octave : ss.octaves) {
    std::vector<GrayImage> diffs;
    diffs.reserve(octave.size() - 1);
    for (std::size_t i = 0; i + 1 < octave.size(); ++i) {
      GrayImage d(octave[i].width, octave[i].height);
      for (std::size_t p = 0; p < d.data.size(); ++p) {
        d.data[p] = octave[i + 1].data[p] - octave[i].data[p];
      }
      diffs.push_back(std::move(d));
    }
    dog.octaves.push_back(std::move(diffs));
  }
  return dog;
}

// A point is a candidate iff it is strictly above, or strictly below, all 26
// neighbours in its 3x3x3 scale-space cell. Plateaus never qualify.
inline std::vector<ExtremumCandidate> detect_extrema(const DoGPyramid& dog) {
  std::vector<ExtremumCandidate> out;
  for (std::size_t o = 0; o < dog.octaves.size(); ++o) {
    const auto& levels = dog.octaves[o];
    for (int l = 1; l + 1 < static_cast<int>(levels.size()); ++l) {
      const GrayImage& below = levels[static_cast<std::size_t>(l - 1)];
      const GrayImage& cur = levels[static_cast<std::size_t>(l)];
      const GrayImage& above = levels[static_cast<std::size_t>(l + 1)];
      for (int y = 1; y + 1 < cur.height; ++y) {
        for (int x = 1; x + 1 < cur.width; ++x) {
          const float v = cur.at(x, y);
          bool is_max = true;
          bool is_min = true;
          for (int dy = -1; dy <= 1 && (is_max || is_min); ++dy) {
            for (int dx = -1; dx <= 1; ++dx) {
              const float b = below.at(x + dx, y + dy);
              const float a = above.at(x + dx, y + dy);
              is_max = is_max && v > b && v > a;
              is_min = is_min && v < b && v < a;
              if (dx != 0 || dy != 0) {
                const float c = cur.at(x + dx, y + dy);
                is_max = is_max && v > c;
                is_min = is_min && v < c;
              }
            }
          }
          if (is_max || is_min) {
            out.push_back({static_cast<int>(o), l, x, y});
          }
        }
      }
    }
  }
  return out;
}

namespace detail {

// 3-vector/3x3 helpers for the quadratic refinement solve.
struct Vec3 {
  double v[3];
};
struct Mat3 {
  double m[3][3];
};

inline std::optional<Vec3> solve3(const Mat3& a, const Vec3& b) {
  const double det = a.m[0][0] * (a.m[1][1] * a.m[2][2] - a.m[1][2] * a.m[2][1]) -
                     a.m[0][1] * (a.m[1][0] * a.m[2][2] - a.m[1][2] * a.m[2][0]) +
                     a.m[0][2] * (a.m[1][0] * a.m[2][1] - a.m[1][1] * a.m[2][0]);
  if (std::abs(det) < 1e-20) return std::nullopt;
  Mat3 inv;
  inv.m[0][0] = (a.m[1][1] * a.m[2][2] - a.m[1][2] * a.m[2][1]) / det;
  inv.m[0][1] = (a.m[0][2] * a.m[2][1] - a.m[0][1] * a.m[2][2]) / det;
  inv.m[0][2] = (a.m[0][1] * a.m[1][2] - a.m[0][2] * a.m[1][1]) / det;
  inv.m[1][0] = (a.m[1][2] * a.m[2][0] - a.m[1][0] * a.m[2][2]) / det;
  inv.m[1][1] = (a.m[0][0] * a.m[2][2] - a.m[0][2] * a.m[2][0]) / det;
  inv.m[1][2] = (a.m[0][2] * a.m[1][0] - a.m[0][0] * a.m[1][2]) / det;
  inv.m[2][0] = (a.m[1][0] * a.m[2][1] - a.m[1][1] * a.m[2][0]) / det;
  inv.m[2][1] = (a.m[0][1] * a.m[2][0] - a.m[0][0] * a.m[2][1]) / det;
  inv.m[2][2] = (a.m[0][0] * a.m[1][1] - a.m[0][1] * a.m[1][0]) / det;
  Vec3 x;
  for (int i = 0; i < 3; ++i) {
    x.v[i] = inv.m[i][0] * b.v[0] + inv.m[i][1] * b.v[1] + inv.m[i][2] * b.v[2];
  }
  return x;
}

inline double wrap_angle(double a) {
  a = std::fmod(a, kTwoPi);
  if (a < 0.0) a += kTwoPi;
  // fmod can return exactly 2*pi after the correction when a was a tiny
  // negative number.
  if (a >= kTwoPi) a = 0.0;
  return a;
}

}  // namespace detail

// Quadratic 3-D refinement plus the low-contrast and edge-response rejections.
inline std::vector<Keypoint> refine_keypoints(const std::vector<ExtremumCandidate>& candidates,
                                              const DoGPyramid& dog, double contrast_thresh,
                                              double edge_ratio, double sigma0 = 1.6) {
  std::vector<Keypoint> out;
  const int s = dog.intervals;
  const double edge_bound = (edge_ratio + 1.0) * (edge_ratio + 1.0) / edge_ratio;

  for (const ExtremumCandidate& cand : candidates) {
    const auto& levels = dog.octaves[static_cast<std::size_t>(cand.octave)];
    int x = cand.x;
    int y = cand.y;
    int l = cand.level;
    const int w = levels[0].width;
    const int h = levels[0].height;

    detail::Vec3 offset{};
    detail::Vec3 grad{};
    bool converged = false;
    for (int step = 0; step < 5; ++step) {
      const GrayImage& d0 = levels[static_cast<std::size_t>(l - 1)];
      const GrayImage& d1 = levels[static_cast<std::size_t>(l)];
      const GrayImage& d2 = levels[static_cast<std::size_t>(l + 1)];

      grad.v[0] = 0.5 * (d1.at(x + 1, y) - d1.at(x - 1, y));
      grad.v[1] = 0.5 * (d1.at(x, y + 1) - d1.at(x, y - 1));
      grad.v[2] = 0.5 * (d2.at(x, y) - d0.at(x, y));

      detail::Mat3 hess;
      const double v = d1.at(x, y);
      hess.m[0][0] = d1.at(x + 1, y) - 2.0 * v + d1.at(x - 1, y);
      hess.m[1][1] = d1.at(x, y + 1) - 2.0 * v + d1.at(x, y - 1);
      hess.m[2][2] = d2.at(x, y) - 2.0 * v + d0.at(x, y);
      hess.m[0][1] = hess.m[1][0] =
          0.25 * (d1.at(x + 1, y + 1) - d1.at(x - 1, y + 1) - d1.at(x + 1, y - 1) + d1.at(x - 1, y - 1));
      hess.m[0][2] = hess.m[2][0] =
          0.25 * (d2.at(x + 1, y) - d2.at(x - 1, y) - d0.at(x + 1, y) + d0.at(x - 1, y));
      hess.m[1][2] = hess.m[2][1] =
          0.25 * (d2.at(x, y + 1) - d2.at(x, y - 1) - d0.at(x, y + 1) + d0.at(x, y - 1));

      auto solved = detail::solve3(hess, {{-grad.v[0], -grad.v[1], -grad.v[2]}});
      if (!solved) break;
      offset = *solved;

      if (std::abs(offset.v[0]) <= 0.5 && std::abs(offset.v[1]) <= 0.5 && std::abs(offset.v[2]) <= 0.5) {
        converged = true;
        break;
      }
      x += offset.v[0] > 0.5 ? 1 : (offset.v[0] < -0.5 ? -1 : 0);
      y += offset.v[1] > 0.5 ? 1 : (offset.v[1] < -0.5 ? -1 : 0);
      l += offset.v[2] > 0.5 ? 1 : (offset.v[2] < -0.5 ? -1 : 0);
      if (x < 1 || x + 1 >= w || y < 1 || y + 1 >= h || l < 1 || l > s) break;
    }
    if (!converged) continue;

    const GrayImage& d1 = levels[static_cast<std::size_t>(l)];
    const double refined =
        d1.at(x, y) + 0.5 * (grad.v[0] * offset.v[0] + grad.v[1] * offset.v[1] + grad.v[2] * offset.v[2]);
    if (std::abs(refined) < contrast_thresh) continue;

    const double v = d1.at(x, y);
    const double dxx = d1.at(x + 1, y) - 2.0 * v + d1.at(x - 1, y);
    const double dyy = d1.at(x, y + 1) - 2.0 * v + d1.at(x, y - 1);
    const double dxy =
        0.25 * (d1.at(x + 1, y + 1) - d1.at(x - 1, y + 1) - d1.at(x + 1, y - 1) + d1.at(x - 1, y - 1));
    const double tr = dxx + dyy;
    const double det = dxx * dyy - dxy * dxy;
    if (det <= 0.0 || tr * tr / det >= edge_bound) continue;

    const double octave_scale = static_cast<double>(1 << cand.octave);
    Keypoint kp;
    kp.x = static_cast<float>((x + offset.v[0]) * octave_scale);
    kp.y = static_cast<float>((y + offset.v[1]) * octave_scale);
    kp.octave = cand.octave;
    kp.interval = static_cast<float>(l + offset.v[2]);
    kp.sigma = static_cast<float>(sigma0 * std::pow(2.0, kp.interval / s) * octave_scale);
    kp.response = static_cast<float>(std::abs(refined));

    const int base_w = dog.octaves[0][0].width;
    const int base_h = dog.octaves[0][0].height;
    if (kp.x < 0.f || kp.x >= static_cast<float>(base_w) || kp.y < 0.f || kp.y >= static_cast<float>(base_h)) {
      continue;
    }
    out.push_back(kp);
  }
  return out;
}

// Gradient-direction histogram over a Gaussian-weighted window: 36 bins of 10
// degrees, peak bins at >= 80% of the maximum each emit an oriented copy with
// a parabola-interpolated angle.
inline std::vector<Keypoint> assign_orientations(const Keypoint& kp, const ScaleSpace& ss) {
  const auto& octave = ss.octaves[static_cast<std::size_t>(kp.octave)];
  const int s = ss.intervals;
  const int level = std::clamp(static_cast<int>(std::lround(kp.interval)), 0, s + 2);
  const GrayImage& img = octave[static_cast<std::size_t>(level)];

  const double octave_scale = static_cast<double>(1 << kp.octave);
  const double cx = kp.x / octave_scale;
  const double cy = kp.y / octave_scale;
  const double scale_oct = kp.sigma / octave_scale;
  const double sigma_w = 1.5 * scale_oct;
  const int radius = std::max(1, static_cast<int>(std::lround(3.0 * sigma_w)));
  const int ix = static_cast<int>(std::lround(cx));
  const int iy = static_cast<int>(std::lround(cy));

  constexpr int kBins = 36;
  std::array<double, kBins> hist{};
  const double denom = 2.0 * sigma_w * sigma_w;

  for (int dy = -radius; dy <= radius; ++dy) {
    for (int dx = -radius; dx <= radius; ++dx) {
      const int px = ix + dx;
      const int py = iy + dy;
      if (px < 1 || px + 1 >= img.width || py < 1 || py + 1 >= img.height) continue;
      const double gx = img.at(px + 1, py) - img.at(px - 1, py);
      const double gy = img.at(px, py + 1) - img.at(px, py - 1);
      const double mag = std::sqrt(gx * gx + gy * gy);
      const double ang = detail::wrap_angle(std::atan2(gy, gx));
      const double weight = std::exp(-(static_cast<double>(dx) * dx + static_cast<double>(dy) * dy) / denom);
      // Bin centres sit at multiples of 10 degrees so an axis-aligned
      // gradient lands exactly on a centre.
      int bin = static_cast<int>(std::lround(ang / kTwoPi * kBins)) % kBins;
      hist[static_cast<std::size_t>(bin)] += weight * mag;
    }
  }

  double max_v = 0.0;
  for (double v : hist) max_v = std::max(max_v, v);
  std::vector<Keypoint> out;
  if (max_v <= 0.0) return out;

  for (int b = 0; b < kBins; ++b) {
    const double c = hist[static_cast<std::size_t>(b)];
    const double l = hist[static_cast<std::size_t>((b + kBins - 1) % kBins)];
    const double r = hist[static_cast<std::size_t>((b + 1) % kBins)];
    if (!(c > l && c > r)) continue;  // peaks only; a shoulder bin over 80% is not a direction
    if (c < 0.8 * max_v) continue;
    const double denom_p = l - 2.0 * c + r;
    const double delta = denom_p != 0.0 ? 0.5 * (l - r) / denom_p : 0.0;
    Keypoint oriented = kp;
    oriented.orientation = static_cast<float>(detail::wrap_angle((b + delta) * (kTwoPi / kBins)));
    out.push_back(oriented);
  }
  return out;
}

// 4x4 spatial x 8 orientation histogram over a rotated 16x16 sample grid.
// Returns nothing when the sample window is not fully inside the image.
inline std::optional<Descriptor> compute_descriptor(const Keypoint& kp, const ScaleSpace& ss) {
  constexpr int kGrid = 16;       // samples per side
  constexpr int kCells = 4;       // spatial histogram cells per side
  constexpr int kOri = 8;         // orientation bins
  constexpr double kClamp = 0.2;  // illumination clamp after the first normalise

  const auto& octave = ss.octaves[static_cast<std::size_t>(kp.octave)];
  const int s = ss.intervals;
  const int level = std::clamp(static_cast<int>(std::lround(kp.interval)), 0, s + 2);
  const GrayImage& img = octave[static_cast<std::size_t>(level)];

  const double octave_scale = static_cast<double>(1 << kp.octave);
  const double cx = kp.x / octave_scale;
  const double cy = kp.y / octave_scale;
  const double scale_oct = kp.sigma / octave_scale;
  // Each 4-sample cell spans 3*scale pixels, so samples sit 0.75*scale apart.
  const double spacing = 0.75 * scale_oct;

  // Reject windows that would need pixels outside the image (plus the margins
  // bilinear interpolation and central differences consume).
  const double reach = spacing * 7.5 * std::sqrt(2.0) + 2.0;
  if (cx - reach < 1.0 || cx + reach + 1.0 >= img.width || cy - reach < 1.0 ||
      cy + reach + 1.0 >= img.height) {
    return std::nullopt;
  }

  const double cos_o = std::cos(kp.orientation);
  const double sin_o = std::sin(kp.orientation);

  // Gradient of the Gaussian image, bilinearly interpolated between the
  // central differences at the four surrounding pixels.
  auto gradient_at = [&img](double sx, double sy, double& gx, double& gy) {
    const int x0 = static_cast<int>(std::floor(sx));
    const int y0 = static_cast<int>(std::floor(sy));
    const double fx = sx - x0;
    const double fy = sy - y0;
    auto grad = [&img](int px, int py, double& ox, double& oy) {
      ox = img.at(px + 1, py) - img.at(px - 1, py);
      oy = img.at(px, py + 1) - img.at(px, py - 1);
    };
    double gx00, gy00, gx10, gy10, gx01, gy01, gx11, gy11;
    grad(x0, y0, gx00, gy00);
    grad(x0 + 1, y0, gx10, gy10);
    grad(x0, y0 + 1, gx01, gy01);
    grad(x0 + 1, y0 + 1, gx11, gy11);
    gx = (gx00 * (1 - fx) + gx10 * fx) * (1 - fy) + (gx01 * (1 - fx) + gx11 * fx) * fy;
    gy = (gy00 * (1 - fx) + gy10 * fx) * (1 - fy) + (gy01 * (1 - fx) + gy11 * fx) * fy;
  };

  double hist[kCells][kCells][kOri] = {};
  const double sigma_d = kGrid / 2.0;  // Gaussian weight sigma: half the window width
  const double denom = 2.0 * sigma_d * sigma_d;

  for (int i = 0; i < kGrid; ++i) {
    for (int j = 0; j < kGrid; ++j) {
      const double u = j - (kGrid - 1) / 2.0;  // grid coords, centred
      const double v = i - (kGrid - 1) / 2.0;
      const double ox = spacing * (cos_o * u - sin_o * v);
      const double oy = spacing * (sin_o * u + cos_o * v);
      double gx, gy;
      gradient_at(cx + ox, cy + oy, gx, gy);
      const double mag = std::sqrt(gx * gx + gy * gy);
      if (mag == 0.0) continue;
      const double ang = detail::wrap_angle(std::atan2(gy, gx) - kp.orientation);
      const double weight = std::exp(-(u * u + v * v) / denom);

      // Fractional bin coordinates; edge samples spill half a cell outside
      // and that share is dropped.
      const double xbin = u / 4.0 + 1.5;
      const double ybin = v / 4.0 + 1.5;
      const double obin = ang / kTwoPi * kOri;

      const int x0 = static_cast<int>(std::floor(xbin));
      const int y0 = static_cast<int>(std::floor(ybin));
      const int o0 = static_cast<int>(std::floor(obin));
      const double fx = xbin - x0;
      const double fy = ybin - y0;
      const double fo = obin - o0;
      const double contrib = mag * weight;

      for (int dy = 0; dy < 2; ++dy) {
        const int yb = y0 + dy;
        if (yb < 0 || yb >= kCells) continue;
        const double wy = dy ? fy : 1.0 - fy;
        for (int dx = 0; dx < 2; ++dx) {
          const int xb = x0 + dx;
          if (xb < 0 || xb >= kCells) continue;
          const double wx = dx ? fx : 1.0 - fx;
          for (int dk = 0; dk < 2; ++dk) {
            const int ob = (o0 + dk) % kOri;
            const double wo = dk ? fo : 1.0 - fo;
            hist[yb][xb][ob] += contrib * wy * wx * wo;
          }
        }
      }
    }
  }

  std::array<double, 128> vec{};
  std::size_t idx = 0;
  for (int i = 0; i < kCells; ++i) {
    for (int j = 0; j < kCells; ++j) {
      for (int o = 0; o < kOri; ++o) vec[idx++] = hist[i][j][o];
    }
  }

  double norm = 0.0;
  for (double v : vec) norm += v * v;
  norm = std::sqrt(norm);
  if (norm < 1e-12) return std::nullopt;
  for (double& v : vec) v = std::min(v / norm, kClamp);
  norm = 0.0;
  for (double v : vec) norm += v * v;
  norm = std::sqrt(norm);
  if (norm < 1e-12) return std::nullopt;

  Descriptor d;
  for (std::size_t i = 0; i < vec.size(); ++i) d.values[i] = static_cast<float>(vec[i] / norm);
  return d;
}

// Detection through refinement; exposed separately so mask filtering can be
// checked against the unfiltered set.
inline std::vector<Keypoint> detect_keypoints(const GrayImage& image, const SiftConfig& cfg,
                                              ScaleSpace* out_ss = nullptr) {
  const ScaleSpace ss =
      build_scale_space(image, cfg.sigma0, cfg.intervals, cfg.n_octaves, cfg.assumed_blur);
  const DoGPyramid dog = build_dog(ss);
  std::vector<Keypoint> kps =
      refine_keypoints(detect_extrema(dog), dog, cfg.contrast_thresh, cfg.edge_ratio, cfg.sigma0);
  if (out_ss) *out_ss = ss;
  return kps;
}

// Full extraction chain. When a mask is given, keypoints whose mask value at
// the rounded location falls below keypoint_threshold are dropped before
// orientation assignment. Output order is (octave, y, x, orientation).
inline std::vector<Feature> extract(const GrayImage& image, const SoftMask* mask,
                                    const SiftConfig& cfg, double keypoint_threshold = 0.75) {
  if (mask && (mask->width != image.width || mask->height != image.height)) {
    throw ArgumentError("extract: mask dimensions differ from image");
  }

  const GrayImage* work = &image;
  GrayImage upsampled;
  double coord_scale = 1.0;
  SiftConfig eff = cfg;
  if (cfg.upsample) {
    upsampled = upsample_double(image);
    work = &upsampled;
    coord_scale = 0.5;
    eff.assumed_blur = cfg.assumed_blur * 2.0;  // doubling the image doubles its blur
  }

  ScaleSpace ss;
  std::vector<Keypoint> kps = detect_keypoints(*work, eff, &ss);

  std::vector<Feature> features;
  for (Keypoint& kp : kps) {
    if (mask) {
      const auto mx = static_cast<int>(std::lround(kp.x * coord_scale));
      const auto my = static_cast<int>(std::lround(kp.y * coord_scale));
      const int cxm = std::clamp(mx, 0, mask->width - 1);
      const int cym = std::clamp(my, 0, mask->height - 1);
      if (mask->at(cxm, cym) < static_cast<float>(keypoint_threshold)) continue;
    }
    for (const Keypoint& oriented : assign_orientations(kp, ss)) {
      if (auto desc = compute_descriptor(oriented, ss)) {
        Feature f;
        f.keypoint = oriented;
        f.keypoint.x = static_cast<float>(oriented.x * coord_scale);
        f.keypoint.y = static_cast<float>(oriented.y * coord_scale);
        f.keypoint.sigma = static_cast<float>(oriented.sigma * coord_scale);
        f.descriptor = *desc;
        features.push_back(std::move(f));
      }
    }
  }

  std::sort(features.begin(), features.end(), [](const Feature& a, const Feature& b) {
    const Keypoint& p = a.keypoint;
    const Keypoint& q = b.keypoint;
    if (p.octave != q.octave) return p.octave < q.octave;
    if (p.y != q.y) return p.y < q.y;
    if (p.x != q.x) return p.x < q.x;
    return p.orientation < q.orientation;
  });
  return features;
}

}  // namespace kakamatch
