#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>

#include "kakamatch/error.hpp"
#include "kakamatch/matching.hpp"
#include "kakamatch/segment.hpp"
#include "kakamatch/sift.hpp"
#include "kakamatch/similarity.hpp"

namespace kakamatch {

// Flat key=value configuration for the whole pipeline. Unknown keys are
// rejected; all randomness derives from `seed` unless a stage seed is pinned
// explicitly.
struct PipelineConfig {
  std::uint64_t seed = 7;

  std::optional<std::uint64_t> kmeans_seed;  // default: fnv1a64("kmeans") ^ seed
  int kmeans_max_iters = 100;
  double kmeans_tol = 1e-4;

  double mask_min_blob_frac = 0.02;
  int mask_blur = 9;
  double mask_keypoint_threshold = 0.75;
  BackgroundPolicy mask_bg_policy = BackgroundPolicy::BrighterIsBackground;

  double sift_sigma0 = 1.6;
  int sift_intervals = 3;
  double sift_contrast = 0.03;
  double sift_edge_ratio = 10.0;
  bool sift_upsample = false;

  MatchStrategy match_strategy = MatchStrategy::Mnn;
  double match_ratio = 0.8;

  int ransac_iters = 1000;
  double ransac_inlier_px = 3.0;

  std::uint64_t effective_kmeans_seed() const {
    return kmeans_seed ? *kmeans_seed : stage_seed("kmeans", seed);
  }

  MaskConfig mask_config() const {
    MaskConfig mc;
    mc.kmeans.seed = effective_kmeans_seed();
    mc.kmeans.max_iters = kmeans_max_iters;
    mc.kmeans.tol = kmeans_tol;
    mc.min_blob_frac = mask_min_blob_frac;
    mc.blur = mask_blur;
    mc.bg_policy = mask_bg_policy;
    return mc;
  }

  SiftConfig sift_config() const {
    SiftConfig sc;
    sc.sigma0 = sift_sigma0;
    sc.intervals = sift_intervals;
    sc.contrast_thresh = sift_contrast;
    sc.edge_ratio = sift_edge_ratio;
    sc.upsample = sift_upsample;
    return sc;
  }

  MatchConfig match_config() const {
    MatchConfig mc;
    mc.strategy = match_strategy;
    mc.ratio = match_ratio;
    mc.ransac_iters = ransac_iters;
    mc.ransac_inlier_px = ransac_inlier_px;
    mc.seed = seed;
    return mc;
  }
};

namespace detail {

inline std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view key, std::string_view value) {
  double out = 0.0;
  const auto res = std::from_chars(value.data(), value.data() + value.size(), out);
  if (res.ec != std::errc{} || res.ptr != value.data() + value.size()) {
    throw ConfigError("config: bad number for " + std::string(key) + ": '" + std::string(value) + "'");
  }
  return out;
}

inline std::uint64_t parse_u64(std::string_view key, std::string_view value) {
  std::uint64_t out = 0;
  const auto res = std::from_chars(value.data(), value.data() + value.size(), out);
  if (res.ec != std::errc{} || res.ptr != value.data() + value.size()) {
    throw ConfigError("config: bad integer for " + std::string(key) + ": '" + std::string(value) + "'");
  }
  return out;
}

inline int parse_int(std::string_view key, std::string_view value) {
  int out = 0;
  const auto res = std::from_chars(value.data(), value.data() + value.size(), out);
  if (res.ec != std::errc{} || res.ptr != value.data() + value.size()) {
    throw ConfigError("config: bad integer for " + std::string(key) + ": '" + std::string(value) + "'");
  }
  return out;
}

inline bool parse_bool(std::string_view key, std::string_view value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError("config: bad boolean for " + std::string(key) + ": '" + std::string(value) + "'");
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace detail

inline void apply_config_key(PipelineConfig& cfg, std::string_view key, std::string_view value) {
  using detail::parse_bool;
  using detail::parse_double;
  using detail::parse_int;
  using detail::parse_u64;

  if (key == "seed") {
    cfg.seed = parse_u64(key, value);
  } else if (key == "kmeans.seed") {
    cfg.kmeans_seed = parse_u64(key, value);
  } else if (key == "kmeans.max_iters") {
    cfg.kmeans_max_iters = parse_int(key, value);
  } else if (key == "kmeans.tol") {
    cfg.kmeans_tol = parse_double(key, value);
  } else if (key == "mask.min_blob_frac") {
    cfg.mask_min_blob_frac = parse_double(key, value);
  } else if (key == "mask.blur") {
    cfg.mask_blur = parse_int(key, value);
  } else if (key == "mask.keypoint_threshold") {
    cfg.mask_keypoint_threshold = parse_double(key, value);
  } else if (key == "mask.bg_policy") {
    if (value == "brighter-is-background") {
      cfg.mask_bg_policy = BackgroundPolicy::BrighterIsBackground;
    } else if (value == "border-majority") {
      cfg.mask_bg_policy = BackgroundPolicy::BorderMajority;
    } else {
      throw ConfigError("config: unknown mask.bg_policy '" + std::string(value) + "'");
    }
  } else if (key == "sift.sigma0") {
    cfg.sift_sigma0 = parse_double(key, value);
  } else if (key == "sift.intervals") {
    cfg.sift_intervals = parse_int(key, value);
  } else if (key == "sift.contrast") {
    cfg.sift_contrast = parse_double(key, value);
  } else if (key == "sift.edge_ratio") {
    cfg.sift_edge_ratio = parse_double(key, value);
  } else if (key == "sift.upsample") {
    cfg.sift_upsample = parse_bool(key, value);
  } else if (key == "match.strategy") {
    if (value == "nn") {
      cfg.match_strategy = MatchStrategy::Nn;
    } else if (value == "mnn") {
      cfg.match_strategy = MatchStrategy::Mnn;
    } else if (value == "nndr") {
      cfg.match_strategy = MatchStrategy::Nndr;
    } else {
      throw ConfigError("config: unknown match.strategy '" + std::string(value) + "'");
    }
  } else if (key == "match.ratio") {
    cfg.match_ratio = parse_double(key, value);
  } else if (key == "ransac.iters") {
    cfg.ransac_iters = parse_int(key, value);
  } else if (key == "ransac.inlier_px") {
    cfg.ransac_inlier_px = parse_double(key, value);
  } else {
    throw ConfigError("config: unknown key '" + std::string(key) + "'");
  }
}

inline void validate_config(const PipelineConfig& cfg) {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(std::string("config: ") + what);
  };
  require(cfg.kmeans_max_iters >= 1, "kmeans.max_iters must be >= 1");
  require(cfg.kmeans_tol > 0.0, "kmeans.tol must be positive");
  require(cfg.mask_min_blob_frac >= 0.0 && cfg.mask_min_blob_frac <= 1.0,
          "mask.min_blob_frac must be in [0,1]");
  require(cfg.mask_blur >= 1 && cfg.mask_blur % 2 == 1, "mask.blur must be odd and positive");
  require(cfg.mask_keypoint_threshold >= 0.0 && cfg.mask_keypoint_threshold <= 1.0,
          "mask.keypoint_threshold must be in [0,1]");
  require(cfg.sift_sigma0 > 0.0, "sift.sigma0 must be positive");
  require(cfg.sift_intervals >= 1, "sift.intervals must be >= 1");
  require(cfg.sift_contrast >= 0.0, "sift.contrast must be non-negative");
  require(cfg.sift_edge_ratio >= 1.0, "sift.edge_ratio must be >= 1");
  require(cfg.match_ratio > 0.0 && cfg.match_ratio <= 1.0, "match.ratio must be in (0,1]");
  require(cfg.ransac_iters >= 1, "ransac.iters must be >= 1");
  require(cfg.ransac_inlier_px > 0.0, "ransac.inlier_px must be positive");
}

// key=value lines; '#' starts a comment; blank lines ignored.
inline PipelineConfig parse_config(const std::string& text) {
  PipelineConfig cfg;
  std::size_t pos = 0;
  int line_no = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    std::string_view line = detail::trim(std::string_view(text).substr(pos, end - pos));
    ++line_no;
    pos = end + 1;
    if (line.empty() || line.front() == '#') continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("config: line " + std::to_string(line_no) + " is not key=value");
    }
    apply_config_key(cfg, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
    if (pos > text.size()) break;
  }
  validate_config(cfg);
  return cfg;
}

inline std::string serialize_config(const PipelineConfig& cfg) {
  using detail::format_double;
  std::string out;
  out += "seed=" + std::to_string(cfg.seed) + "\n";
  if (cfg.kmeans_seed) out += "kmeans.seed=" + std::to_string(*cfg.kmeans_seed) + "\n";
  out += "kmeans.max_iters=" + std::to_string(cfg.kmeans_max_iters) + "\n";
  out += "kmeans.tol=" + format_double(cfg.kmeans_tol) + "\n";
  out += "mask.min_blob_frac=" + format_double(cfg.mask_min_blob_frac) + "\n";
  out += "mask.blur=" + std::to_string(cfg.mask_blur) + "\n";
  out += "mask.keypoint_threshold=" + format_double(cfg.mask_keypoint_threshold) + "\n";
  out += std::string("mask.bg_policy=") +
         (cfg.mask_bg_policy == BackgroundPolicy::BrighterIsBackground ? "brighter-is-background"
                                                                       : "border-majority") +
         "\n";
  out += "sift.sigma0=" + format_double(cfg.sift_sigma0) + "\n";
  out += "sift.intervals=" + std::to_string(cfg.sift_intervals) + "\n";
  out += "sift.contrast=" + format_double(cfg.sift_contrast) + "\n";
  out += "sift.edge_ratio=" + format_double(cfg.sift_edge_ratio) + "\n";
  out += std::string("sift.upsample=") + (cfg.sift_upsample ? "true" : "false") + "\n";
  out += std::string("match.strategy=") + to_string(cfg.match_strategy) + "\n";
  out += "match.ratio=" + format_double(cfg.match_ratio) + "\n";
  out += "ransac.iters=" + std::to_string(cfg.ransac_iters) + "\n";
  out += "ransac.inlier_px=" + format_double(cfg.ransac_inlier_px) + "\n";
  return out;
}

inline PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_config(text);
}

}  // namespace kakamatch
