#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "kakamatch/error.hpp"
#include "kakamatch/filter.hpp"
#include "kakamatch/image.hpp"
#include "kakamatch/rng.hpp"

namespace kakamatch {

// Per-pixel cluster assignment plus the centroids that produced it.
// Centroids live in the pixel feature space: gray in [0,1] (dim 1) or
// RGB in [0,1]^3 (dim 3).
struct LabelMap {
  int width = 0;
  int height = 0;
  int k = 0;
  int dim = 1;
  std::vector<std::int32_t> labels;
  std::vector<std::array<float, 3>> centroids;

  std::int32_t label_at(int x, int y) const { return labels[static_cast<std::size_t>(y) * width + x]; }
};

struct BinaryMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;  // values exactly 0 or 1

  BinaryMask() = default;
  BinaryMask(int w, int h, std::uint8_t fill = 0)
      : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {
    if (w < 1 || h < 1) throw ArgumentError("BinaryMask: dimensions must be >= 1");
  }

  std::uint8_t& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }

  bool operator==(const BinaryMask&) const = default;
};

enum class BackgroundPolicy {
  BrighterIsBackground,  // feeder cover is matte white: brighter centroid is background
  BorderMajority,        // cluster owning most border pixels is background
};

struct KMeansParams {
  std::uint64_t seed = 0;
  int max_iters = 100;
  double tol = 1e-4;
};

// Optional per-iteration diagnostics (within-cluster SSE measured after each
// assignment step; it is non-increasing across iterations).
struct KMeansTrace {
  std::vector<double> sse;
  int iterations = 0;
  bool converged = false;
};

namespace detail {

inline void pixel_features(const GrayImage& img, std::vector<std::array<float, 3>>& out, int& dim) {
  dim = 1;
  out.resize(img.data.size());
  for (std::size_t i = 0; i < img.data.size(); ++i) out[i] = {img.data[i], 0.f, 0.f};
}

inline void pixel_features(const RgbImage& img, std::vector<std::array<float, 3>>& out, int& dim) {
  dim = 3;
  const std::size_t n = static_cast<std::size_t>(img.width) * img.height;
  out.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = {img.data[i * 3] / 255.f, img.data[i * 3 + 1] / 255.f, img.data[i * 3 + 2] / 255.f};
  }
}

inline double feature_dist2(const std::array<float, 3>& a, const std::array<float, 3>& b, int dim) {
  double d2 = 0.0;
  for (int c = 0; c < dim; ++c) {
    const double d = static_cast<double>(a[c]) - b[c];
    d2 += d * d;
  }
  return d2;
}

inline double centroid_luminance(const std::array<float, 3>& c, int dim) {
  if (dim == 1) return c[0];
  return 0.299 * c[0] + 0.587 * c[1] + 0.114 * c[2];
}

}  // namespace detail

// Lloyd's algorithm over per-pixel feature vectors. Centroids start at k
// distinct pixel positions sampled with the given seed; an empty cluster is
// re-seeded to the pixel farthest from its assigned centroid. Deterministic
// for a fixed seed.
template <typename ImageT>
LabelMap kmeans_segment(const ImageT& image, int k, const KMeansParams& params,
                        KMeansTrace* trace = nullptr) {
  if (k < 1) throw ArgumentError("kmeans_segment: k must be >= 1");

  LabelMap map;
  map.width = image.width;
  map.height = image.height;
  map.k = k;

  std::vector<std::array<float, 3>> feat;
  detail::pixel_features(image, feat, map.dim);
  const std::size_t n = feat.size();

  // Initial centroids: k distinct pixel positions (values may still collide;
  // the empty-cluster rule recovers).
  Rng rng(params.seed);
  std::vector<std::size_t> picks;
  picks.reserve(static_cast<std::size_t>(k));
  for (int c = 0; c < k; ++c) {
    if (picks.size() >= n) {
      picks.push_back(rng.next_below(n));
      continue;
    }
    for (;;) {
      std::size_t idx = rng.next_below(n);
      bool dup = false;
      for (std::size_t p : picks) dup = dup || (p == idx);
      if (!dup) {
        picks.push_back(idx);
        break;
      }
    }
  }
  map.centroids.resize(static_cast<std::size_t>(k));
  for (int c = 0; c < k; ++c) map.centroids[static_cast<std::size_t>(c)] = feat[picks[static_cast<std::size_t>(c)]];

  map.labels.assign(n, 0);
  if (trace) *trace = KMeansTrace{};

  for (int iter = 0; iter < params.max_iters; ++iter) {
    // Assignment step; ties go to the lowest cluster index.
    double sse = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      int best = 0;
      double best_d2 = detail::feature_dist2(feat[i], map.centroids[0], map.dim);
      for (int c = 1; c < k; ++c) {
        const double d2 = detail::feature_dist2(feat[i], map.centroids[static_cast<std::size_t>(c)], map.dim);
        if (d2 < best_d2) {
          best_d2 = d2;
          best = c;
        }
      }
      map.labels[i] = best;
      sse += best_d2;
    }
    if (trace) {
      trace->sse.push_back(sse);
      trace->iterations = iter + 1;
    }

    // Update step.
    std::vector<std::array<double, 3>> sum(static_cast<std::size_t>(k), {0.0, 0.0, 0.0});
    std::vector<std::size_t> count(static_cast<std::size_t>(k), 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto c = static_cast<std::size_t>(map.labels[i]);
      for (int d = 0; d < map.dim; ++d) sum[c][static_cast<std::size_t>(d)] += feat[i][static_cast<std::size_t>(d)];
      ++count[c];
    }
    double max_shift = 0.0;
    std::vector<std::size_t> reseeded;
    for (int c = 0; c < k; ++c) {
      const auto ci = static_cast<std::size_t>(c);
      if (count[ci] == 0) {
        // Farthest pixel from its own centroid becomes the new seed.
        std::size_t far_idx = 0;
        double far_d2 = -1.0;
        for (std::size_t i = 0; i < n; ++i) {
          bool used = false;
          for (std::size_t r : reseeded) used = used || (r == i);
          if (used) continue;
          const double d2 =
              detail::feature_dist2(feat[i], map.centroids[static_cast<std::size_t>(map.labels[i])], map.dim);
          if (d2 > far_d2) {
            far_d2 = d2;
            far_idx = i;
          }
        }
        reseeded.push_back(far_idx);
        const double shift = std::sqrt(detail::feature_dist2(feat[far_idx], map.centroids[ci], map.dim));
        map.centroids[ci] = feat[far_idx];
        max_shift = std::max(max_shift, shift);
        continue;
      }
      std::array<float, 3> next = {0.f, 0.f, 0.f};
      for (int d = 0; d < map.dim; ++d) {
        next[static_cast<std::size_t>(d)] =
            static_cast<float>(sum[ci][static_cast<std::size_t>(d)] / static_cast<double>(count[ci]));
      }
      const double shift = std::sqrt(detail::feature_dist2(next, map.centroids[ci], map.dim));
      map.centroids[ci] = next;
      max_shift = std::max(max_shift, shift);
    }

    if (max_shift < params.tol) {
      if (trace) trace->converged = true;
      break;
    }
  }
  return map;
}

// Collapses a 2-cluster LabelMap into {background: 0, foreground: 1}.
// Invariant to permutations of the input's cluster indices.
inline BinaryMask normalize_mask(const LabelMap& labels,
                                 BackgroundPolicy policy = BackgroundPolicy::BrighterIsBackground) {
  if (labels.k != 2) throw ArgumentError("normalize_mask: requires a 2-cluster label map");

  int background = 0;
  const double lum0 = detail::centroid_luminance(labels.centroids[0], labels.dim);
  const double lum1 = detail::centroid_luminance(labels.centroids[1], labels.dim);
  if (policy == BackgroundPolicy::BrighterIsBackground) {
    background = lum1 > lum0 ? 1 : 0;
  } else {
    std::array<std::size_t, 2> border_count = {0, 0};
    for (int x = 0; x < labels.width; ++x) {
      ++border_count[static_cast<std::size_t>(labels.label_at(x, 0))];
      if (labels.height > 1) ++border_count[static_cast<std::size_t>(labels.label_at(x, labels.height - 1))];
    }
    for (int y = 1; y + 1 < labels.height; ++y) {
      ++border_count[static_cast<std::size_t>(labels.label_at(0, y))];
      if (labels.width > 1) ++border_count[static_cast<std::size_t>(labels.label_at(labels.width - 1, y))];
    }
    if (border_count[0] == border_count[1]) {
      background = lum1 > lum0 ? 1 : 0;  // fall back on brightness when the border splits evenly
    } else {
      background = border_count[1] > border_count[0] ? 1 : 0;
    }
  }

  BinaryMask mask(labels.width, labels.height);
  for (std::size_t i = 0; i < labels.labels.size(); ++i) {
    mask.data[i] = labels.labels[i] == background ? 0 : 1;
  }
  return mask;
}

inline BinaryMask invert_mask(const BinaryMask& mask) {
  BinaryMask out = mask;
  for (auto& v : out.data) v = v ? 0 : 1;
  return out;
}

// Zeroes 8-connected components of 1s whose area is strictly below min_area.
inline BinaryMask remove_small_blobs(const BinaryMask& mask, std::size_t min_area) {
  BinaryMask out = mask;
  const int w = mask.width;
  const int h = mask.height;
  std::vector<std::uint8_t> visited(mask.data.size(), 0);
  std::vector<std::size_t> stack;
  std::vector<std::size_t> component;

  for (std::size_t start = 0; start < mask.data.size(); ++start) {
    if (mask.data[start] == 0 || visited[start]) continue;
    component.clear();
    stack.assign(1, start);
    visited[start] = 1;
    while (!stack.empty()) {
      const std::size_t idx = stack.back();
      stack.pop_back();
      component.push_back(idx);
      const int x = static_cast<int>(idx % static_cast<std::size_t>(w));
      const int y = static_cast<int>(idx / static_cast<std::size_t>(w));
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          if (dx == 0 && dy == 0) continue;
          const int nx = x + dx;
          const int ny = y + dy;
          if (nx < 0 || nx >= w || ny < 0 || ny >= h) continue;
          const std::size_t nidx = static_cast<std::size_t>(ny) * w + nx;
          if (mask.data[nidx] && !visited[nidx]) {
            visited[nidx] = 1;
            stack.push_back(nidx);
          }
        }
      }
    }
    if (component.size() < min_area) {
      for (std::size_t idx : component) out.data[idx] = 0;
    }
  }
  return out;
}

// Keeps only pixels that both masks mark 1 (their sum is 2). The background
// mask convention: suppressed region = 0, everything else = 1.
inline SoftMask superimpose(const BinaryMask& fg, const BinaryMask& bg) {
  if (fg.width != bg.width || fg.height != bg.height) {
    throw ArgumentError("superimpose: mask dimensions differ");
  }
  SoftMask out(fg.width, fg.height);
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    out.data[i] = (fg.data[i] + bg.data[i] == 2) ? 1.f : 0.f;
  }
  return out;
}

struct MaskConfig {
  KMeansParams kmeans;
  double min_blob_frac = 0.02;  // fraction of image pixels below which a blob is noise
  int blur = 9;
  BackgroundPolicy bg_policy = BackgroundPolicy::BrighterIsBackground;
};

// Full localisation chain: segment both frames, normalise, drop small blobs
// from the subject mask, suppress everything the background frame marks as
// fixed scenery, then soften with a box blur.
template <typename ImageT>
SoftMask build_localisation_mask(const ImageT& foreground_image, const ImageT& background_image,
                                 const MaskConfig& cfg) {
  if (foreground_image.width != background_image.width ||
      foreground_image.height != background_image.height) {
    throw ArgumentError("build_localisation_mask: image dimensions differ");
  }

  const LabelMap fg_labels = kmeans_segment(foreground_image, 2, cfg.kmeans);
  const LabelMap bg_labels = kmeans_segment(background_image, 2, cfg.kmeans);

  const std::size_t pixels =
      static_cast<std::size_t>(foreground_image.width) * static_cast<std::size_t>(foreground_image.height);
  const auto min_area = static_cast<std::size_t>(cfg.min_blob_frac * static_cast<double>(pixels) + 0.5);

  const BinaryMask fg_mask = remove_small_blobs(normalize_mask(fg_labels, cfg.bg_policy), min_area);
  // In the background frame the only non-background object is the fixed
  // scenery to suppress, so its subject mask inverted marks it 0, rest 1.
  const BinaryMask bg_mask = invert_mask(normalize_mask(bg_labels, cfg.bg_policy));

  return mean_blur(superimpose(fg_mask, bg_mask), cfg.blur);
}

// Frame-selection probe: true iff the 8-bit intensity at (w/2, 4h/5)
// exceeds 50.
inline bool select_frame(const GrayImage& image) {
  const int px = image.width / 2;
  const int py = (4 * image.height) / 5;
  return std::lround(image.at(px, py) * 255.f) > 50;
}

}  // namespace kakamatch
