#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kakamatch/error.hpp"
#include "kakamatch/rng.hpp"

namespace kakamatch {

// Owning row-major count x dim matrix of descriptor vectors.
struct DescriptorMatrix {
  std::vector<float> data;
  std::size_t count = 0;
  std::size_t dim = 0;

  std::span<const float> row(std::size_t i) const {
    return std::span<const float>(data.data() + i * dim, dim);
  }

  static DescriptorMatrix from_rows(const std::vector<std::vector<float>>& rows) {
    DescriptorMatrix m;
    m.count = rows.size();
    m.dim = rows.empty() ? 0 : rows.front().size();
    m.data.reserve(m.count * m.dim);
    for (const auto& r : rows) {
      if (r.size() != m.dim) throw ArgumentError("DescriptorMatrix: ragged rows");
      m.data.insert(m.data.end(), r.begin(), r.end());
    }
    return m;
  }
};

struct FeatureMatch {
  int query_idx = 0;
  int train_idx = 0;
  double distance = 0.0;  // Euclidean distance between the two descriptors
};

enum class MatchStrategy { Nn, Mnn, Nndr };

inline const char* to_string(MatchStrategy s) {
  switch (s) {
    case MatchStrategy::Nn: return "nn";
    case MatchStrategy::Mnn: return "mnn";
    case MatchStrategy::Nndr: return "nndr";
  }
  return "?";
}

struct MatchSet {
  std::vector<FeatureMatch> matches;
  MatchStrategy strategy = MatchStrategy::Nn;
};

inline double descriptor_distance(std::span<const float> a, std::span<const float> b) {
  double d2 = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - b[i];
    d2 += d * d;
  }
  return std::sqrt(d2);
}

namespace detail {

// For each query row: index and distance of the nearest train row, plus the
// second-nearest distance. Ties resolve to the lowest train index.
struct NearestTwo {
  int best_idx = -1;
  double best = std::numeric_limits<double>::infinity();
  double second = std::numeric_limits<double>::infinity();
};

inline std::vector<NearestTwo> nearest_two(const DescriptorMatrix& a, const DescriptorMatrix& b) {
  std::vector<NearestTwo> out(a.count);
  for (std::size_t i = 0; i < a.count; ++i) {
    NearestTwo nt;
    const auto qa = a.row(i);
    for (std::size_t j = 0; j < b.count; ++j) {
      const double d = descriptor_distance(qa, b.row(j));
      if (d < nt.best) {
        nt.second = nt.best;
        nt.best = d;
        nt.best_idx = static_cast<int>(j);
      } else if (d < nt.second) {
        nt.second = d;
      }
    }
    out[i] = nt;
  }
  return out;
}

}  // namespace detail

// Brute-force nearest neighbour: one match per query descriptor.
inline MatchSet match_nn(const DescriptorMatrix& a, const DescriptorMatrix& b) {
  if (b.count < 1) throw ArgumentError("match_nn: train set is empty");
  if (a.count > 0 && a.dim != b.dim) throw ArgumentError("match_nn: descriptor dims differ");
  MatchSet out;
  out.strategy = MatchStrategy::Nn;
  const auto nearest = detail::nearest_two(a, b);
  out.matches.reserve(a.count);
  for (std::size_t i = 0; i < a.count; ++i) {
    out.matches.push_back({static_cast<int>(i), nearest[i].best_idx, nearest[i].best});
  }
  return out;
}

// Mutual nearest neighbour: kept iff the two descriptors pick each other.
inline MatchSet match_mnn(const DescriptorMatrix& a, const DescriptorMatrix& b) {
  if (a.count < 1 || b.count < 1) throw ArgumentError("match_mnn: empty descriptor set");
  if (a.dim != b.dim) throw ArgumentError("match_mnn: descriptor dims differ");
  MatchSet out;
  out.strategy = MatchStrategy::Mnn;
  const auto fwd = detail::nearest_two(a, b);
  const auto rev = detail::nearest_two(b, a);
  for (std::size_t i = 0; i < a.count; ++i) {
    const int j = fwd[i].best_idx;
    if (j >= 0 && rev[static_cast<std::size_t>(j)].best_idx == static_cast<int>(i)) {
      out.matches.push_back({static_cast<int>(i), j, fwd[i].best});
    }
  }
  return out;
}

// Distance-ratio test against the second-best match: keep iff d1 < ratio * d2.
inline MatchSet match_nndr(const DescriptorMatrix& a, const DescriptorMatrix& b, double ratio = 0.8) {
  if (b.count < 2) throw ArgumentError("match_nndr: train set needs at least two descriptors");
  if (a.count > 0 && a.dim != b.dim) throw ArgumentError("match_nndr: descriptor dims differ");
  MatchSet out;
  out.strategy = MatchStrategy::Nndr;
  const auto nearest = detail::nearest_two(a, b);
  for (std::size_t i = 0; i < a.count; ++i) {
    if (nearest[i].best < ratio * nearest[i].second) {
      out.matches.push_back({static_cast<int>(i), nearest[i].best_idx, nearest[i].best});
    }
  }
  return out;
}

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

struct PointPair {
  Point2 src;
  Point2 dst;
};

// 3x3 projective transform, row-major, scaled so m[8] = 1 whenever that entry
// is nonzero.
struct Homography {
  std::array<double, 9> m = {1, 0, 0, 0, 1, 0, 0, 0, 1};

  // Projects src through the transform; infinite error for points that map to
  // the line at infinity.
  Point2 project(const Point2& p) const {
    const double w = m[6] * p.x + m[7] * p.y + m[8];
    if (std::abs(w) < 1e-15) {
      return {std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
    }
    return {(m[0] * p.x + m[1] * p.y + m[2]) / w, (m[3] * p.x + m[4] * p.y + m[5]) / w};
  }

  double det() const {
    return m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
           m[2] * (m[3] * m[7] - m[4] * m[6]);
  }
};

inline double reprojection_error(const Homography& h, const PointPair& pair) {
  const Point2 p = h.project(pair.src);
  if (!std::isfinite(p.x) || !std::isfinite(p.y)) return std::numeric_limits<double>::infinity();
  const double dx = p.x - pair.dst.x;
  const double dy = p.y - pair.dst.y;
  return std::sqrt(dx * dx + dy * dy);
}

namespace detail {

struct NormalizeTransform {
  double scale = 1.0;
  double tx = 0.0;
  double ty = 0.0;
};

// Hartley normalisation: centroid to origin, mean distance to sqrt(2).
inline NormalizeTransform normalizer(const std::vector<PointPair>& pairs, bool src) {
  double mx = 0.0, my = 0.0;
  for (const auto& p : pairs) {
    const Point2& pt = src ? p.src : p.dst;
    mx += pt.x;
    my += pt.y;
  }
  mx /= static_cast<double>(pairs.size());
  my /= static_cast<double>(pairs.size());
  double mean_dist = 0.0;
  for (const auto& p : pairs) {
    const Point2& pt = src ? p.src : p.dst;
    mean_dist += std::hypot(pt.x - mx, pt.y - my);
  }
  mean_dist /= static_cast<double>(pairs.size());
  const double scale = mean_dist > 1e-12 ? std::sqrt(2.0) / mean_dist : 1.0;
  return {scale, -scale * mx, -scale * my};
}

}  // namespace detail

// Direct linear transform over >= 4 correspondences. Exact on noise-free
// inputs; least-squares otherwise.
inline Homography fit_homography(const std::vector<PointPair>& pairs) {
  if (pairs.size() < 4) throw ArgumentError("fit_homography: need at least 4 point pairs");

  const auto ns = detail::normalizer(pairs, true);
  const auto nd = detail::normalizer(pairs, false);

  Eigen::Matrix<double, 9, 9> ata = Eigen::Matrix<double, 9, 9>::Zero();
  Eigen::Matrix<double, 1, 9> row1, row2;
  for (const auto& pair : pairs) {
    const double x = ns.scale * pair.src.x + ns.tx;
    const double y = ns.scale * pair.src.y + ns.ty;
    const double u = nd.scale * pair.dst.x + nd.tx;
    const double v = nd.scale * pair.dst.y + nd.ty;
    row1 << -x, -y, -1, 0, 0, 0, u * x, u * y, u;
    row2 << 0, 0, 0, -x, -y, -1, v * x, v * y, v;
    ata += row1.transpose() * row1 + row2.transpose() * row2;
  }

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 9, 9>> eig(ata);
  if (eig.info() != Eigen::Success) throw FitError("fit_homography: eigensolver failed");
  // Rank must be exactly 8 for a unique solution direction.
  const auto& vals = eig.eigenvalues();
  const double scale_ref = std::max(vals(8), 1.0);
  if (vals(1) <= scale_ref * 1e-12) {
    throw FitError("fit_homography: degenerate configuration (rank-deficient system)");
  }
  const Eigen::Matrix<double, 9, 1> h = eig.eigenvectors().col(0);

  // Denormalise: H = Td^-1 * Hn * Ts.
  Eigen::Matrix3d hn;
  hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
  Eigen::Matrix3d ts, td_inv;
  ts << ns.scale, 0, ns.tx, 0, ns.scale, ns.ty, 0, 0, 1;
  td_inv << 1.0 / nd.scale, 0, -nd.tx / nd.scale, 0, 1.0 / nd.scale, -nd.ty / nd.scale, 0, 0, 1;
  Eigen::Matrix3d hm = td_inv * hn * ts;

  Homography out;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) out.m[static_cast<std::size_t>(r * 3 + c)] = hm(r, c);
  }
  if (std::abs(out.m[8]) > 1e-12) {
    for (double& v : out.m) v /= hm(2, 2);
  }
  for (double v : out.m) {
    if (!std::isfinite(v)) throw FitError("fit_homography: non-finite result");
  }
  if (std::abs(out.det()) <= 1e-12) throw FitError("fit_homography: singular transform");
  return out;
}

enum class RansacStatus {
  Ok,
  InsufficientMatches,  // fewer than 4 preliminary matches: sampling impossible
  NoConsensus,          // no transform gathered at least 4 inliers
};

struct RansacResult {
  RansacStatus status = RansacStatus::NoConsensus;
  MatchSet inliers;
  Homography homography;
};

struct RansacConfig {
  int iters = 1000;
  double inlier_px = 3.0;
  std::uint64_t seed = 0;
};

namespace detail {

inline bool three_collinear(const Point2& a, const Point2& b, const Point2& c) {
  const double cross = (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
  return std::abs(cross) < 1e-9;
}

inline bool degenerate_sample(const std::array<PointPair, 4>& sample) {
  for (int i = 0; i < 4; ++i) {
    for (int j = i + 1; j < 4; ++j) {
      for (int k = j + 1; k < 4; ++k) {
        if (three_collinear(sample[static_cast<std::size_t>(i)].src, sample[static_cast<std::size_t>(j)].src,
                            sample[static_cast<std::size_t>(k)].src) ||
            three_collinear(sample[static_cast<std::size_t>(i)].dst, sample[static_cast<std::size_t>(j)].dst,
                            sample[static_cast<std::size_t>(k)].dst)) {
          return true;
        }
      }
    }
  }
  return false;
}

}  // namespace detail

// Random-sample consensus over 4-match samples. Per-iteration sampling streams
// derive from (seed, iteration), so results do not depend on evaluation order.
// The winning consensus (ties to the lower iteration) is refit over all of its
// inliers; every retained match reprojects within inlier_px under the
// returned transform.
inline RansacResult ransac_filter(const MatchSet& ms, const std::vector<Point2>& points_a,
                                  const std::vector<Point2>& points_b, const RansacConfig& cfg) {
  RansacResult result;
  result.inliers.strategy = ms.strategy;
  if (ms.matches.size() < 4) {
    result.status = RansacStatus::InsufficientMatches;
    return result;
  }

  std::vector<PointPair> all(ms.matches.size());
  for (std::size_t i = 0; i < ms.matches.size(); ++i) {
    all[i] = {points_a[static_cast<std::size_t>(ms.matches[i].query_idx)],
              points_b[static_cast<std::size_t>(ms.matches[i].train_idx)]};
  }

  const std::size_t n = ms.matches.size();
  std::size_t best_count = 0;
  Homography best_h;

  for (int iter = 0; iter < cfg.iters; ++iter) {
    Rng rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(iter)));
    std::array<std::size_t, 4> idx{};
    for (int drawn = 0; drawn < 4; ++drawn) {
      std::size_t v;
      bool dup;
      do {
        v = rng.next_below(n);
        dup = false;
        for (int p = 0; p < drawn; ++p) dup = dup || idx[static_cast<std::size_t>(p)] == v;
      } while (dup);
      idx[static_cast<std::size_t>(drawn)] = v;
    }

    std::array<PointPair, 4> sample = {all[idx[0]], all[idx[1]], all[idx[2]], all[idx[3]]};
    if (detail::degenerate_sample(sample)) continue;

    Homography h;
    try {
      h = fit_homography({sample.begin(), sample.end()});
    } catch (const FitError&) {
      continue;
    }

    std::size_t count = 0;
    for (const auto& pair : all) {
      if (reprojection_error(h, pair) < cfg.inlier_px) ++count;
    }
    if (count > best_count) {
      best_count = count;
      best_h = h;
    }
  }

  if (best_count < 4) {
    result.status = RansacStatus::NoConsensus;
    return result;
  }

  auto collect = [&](const Homography& h, MatchSet& dst) {
    dst.matches.clear();
    for (std::size_t i = 0; i < n; ++i) {
      if (reprojection_error(h, all[i]) < cfg.inlier_px) dst.matches.push_back(ms.matches[i]);
    }
  };

  MatchSet consensus;
  consensus.strategy = ms.strategy;
  collect(best_h, consensus);

  // Refit on the full consensus; fall back to the sample-fit transform if the
  // refit collapses the inlier set.
  std::vector<PointPair> consensus_pairs;
  consensus_pairs.reserve(consensus.matches.size());
  for (const auto& m : consensus.matches) {
    consensus_pairs.push_back({points_a[static_cast<std::size_t>(m.query_idx)],
                               points_b[static_cast<std::size_t>(m.train_idx)]});
  }
  try {
    const Homography refit = fit_homography(consensus_pairs);
    MatchSet retained;
    retained.strategy = ms.strategy;
    collect(refit, retained);
    if (retained.matches.size() >= 4) {
      result.status = RansacStatus::Ok;
      result.inliers = std::move(retained);
      result.homography = refit;
      return result;
    }
  } catch (const FitError&) {
  }

  result.status = RansacStatus::Ok;
  result.inliers = std::move(consensus);
  result.homography = best_h;
  return result;
}

}  // namespace kakamatch
