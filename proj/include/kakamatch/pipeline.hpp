#pragma once

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "kakamatch/config.hpp"
#include "kakamatch/eval.hpp"
#include "kakamatch/feature_io.hpp"
#include "kakamatch/pnm.hpp"
#include "kakamatch/segment.hpp"
#include "kakamatch/sift.hpp"
#include "kakamatch/similarity.hpp"
#include "kakamatch/visualize.hpp"

// Command-level operations behind the CLI, kept callable from tests.

namespace kakamatch {

namespace detail {

inline std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::vector<std::filesystem::path> out;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const auto ext = entry.path().extension();
    if (ext == ".pgm" || ext == ".ppm") out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace detail

struct SelectFramesResult {
  int examined = 0;
  int selected = 0;
};

// Applies the probe-point heuristic to every image in the directory and
// writes the selected filenames (one per line, sorted) to the manifest.
inline SelectFramesResult cmd_select_frames(const std::filesystem::path& in_dir,
                                            const std::filesystem::path& out_manifest) {
  SelectFramesResult result;
  std::string manifest;
  for (const auto& path : detail::list_images(in_dir)) {
    ++result.examined;
    if (select_frame(load_gray(path))) {
      ++result.selected;
      manifest += path.filename().string() + "\n";
    }
  }
  std::ofstream out(out_manifest, std::ios::binary);
  if (!out) throw IoError("cannot write manifest " + out_manifest.string());
  out << manifest;
  return result;
}

struct FeaturesResult {
  int written = 0;
  int skipped = 0;
};

// Extracts (optionally mask-filtered) features for every image into
// out_dir/<stem>.siftv1. Existing files are kept unless force is set. The
// localisation mask uses, in order of preference, in_dir/backgrounds/<clip>.pgm
// or the explicit sample background.
inline FeaturesResult cmd_features(const std::filesystem::path& in_dir,
                                   const std::optional<std::filesystem::path>& background,
                                   const std::filesystem::path& out_dir, const PipelineConfig& cfg,
                                   bool force = false, int threads = 0) {
  std::filesystem::create_directories(out_dir);
  const auto images = detail::list_images(in_dir);

  std::optional<GrayImage> sample_bg;
  if (background) sample_bg = load_gray(*background);

  FeaturesResult result;
  std::atomic<int> written{0};
  std::atomic<int> skipped{0};
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::string error_message;
  std::mutex error_mutex;

  auto worker = [&]() {
    for (;;) {
      if (failed.load()) return;
      const std::size_t i = next.fetch_add(1);
      if (i >= images.size()) return;
      const auto& path = images[i];
      try {
        const std::string id = path.stem().string();
        const auto out_path = out_dir / (id + ".siftv1");
        if (!force && std::filesystem::exists(out_path)) {
          skipped.fetch_add(1);
          continue;
        }
        const GrayImage img = load_gray(path);

        std::optional<SoftMask> mask;
        const auto clip_bg = in_dir / "backgrounds" / (clip_of(id) + ".pgm");
        if (std::filesystem::exists(clip_bg)) {
          mask = build_localisation_mask(img, load_gray(clip_bg), cfg.mask_config());
        } else if (sample_bg) {
          mask = build_localisation_mask(img, *sample_bg, cfg.mask_config());
        }

        const auto features = extract(img, mask ? &*mask : nullptr, cfg.sift_config(),
                                      cfg.mask_keypoint_threshold);
        save_features(out_path, features);
        written.fetch_add(1);
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(error_mutex);
        error_message = path.string() + ": " + e.what();
        failed.store(true);
        return;
      }
    }
  };

  if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
  threads = std::max(1, std::min<int>(threads, std::max<int>(1, static_cast<int>(images.size()))));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failed.load()) throw IoError("feature extraction failed: " + error_message);

  result.written = written.load();
  result.skipped = skipped.load();
  return result;
}

inline nlohmann::json homography_json(const Homography& h) {
  nlohmann::json arr = nlohmann::json::array();
  for (double v : h.m) arr.push_back(v);
  return arr;
}

// Pair-match report: strategy and RANSAC settings, counts before and after
// mismatch removal, the fitted transform, and per-inlier records (with
// keypoint geometry so overlays can be drawn from the report alone).
inline nlohmann::json cmd_match(const std::filesystem::path& feat_a,
                                const std::filesystem::path& feat_b, const PipelineConfig& cfg) {
  const std::string id_a = feat_a.stem().string();
  const std::string id_b = feat_b.stem().string();
  const ImageFeatures a = ImageFeatures::from(load_features(feat_a));
  const ImageFeatures b = ImageFeatures::from(load_features(feat_b));

  const MatchConfig mc = cfg.match_config();
  const PairOutcome outcome = evaluate_pair(a, b, mc, id_a, id_b);

  nlohmann::json report;
  report["image_a"] = id_a;
  report["image_b"] = id_b;
  report["strategy"] = to_string(mc.strategy);
  report["ratio"] = mc.ratio;
  report["ransac"] = {{"iters", mc.ransac_iters},
                      {"inlier_px", mc.ransac_inlier_px},
                      {"seed", pair_seed(mc.seed, id_a, id_b)}};
  report["n_preliminary"] = outcome.n_preliminary;

  switch (outcome.status) {
    case PairStatus::Ok: break;
    case PairStatus::EmptyFeatures: report["status"] = "no-match"; return report;
    case PairStatus::InsufficientMatches: report["status"] = "insufficient-matches"; return report;
    case PairStatus::NoConsensus: report["status"] = "no-consensus"; return report;
  }

  const PairResult& pr = *outcome.result;
  report["status"] = "ok";
  report["n_inliers"] = pr.n_matches;
  report["n_matches"] = pr.n_matches;
  report["mean_distance"] = pr.mean_distance;
  report["score"] = pr.score;
  report["homography"] = homography_json(pr.homography);

  nlohmann::json matches = nlohmann::json::array();
  for (const auto& m : pr.inliers.matches) {
    const Keypoint& ka = a.features[static_cast<std::size_t>(m.query_idx)].keypoint;
    const Keypoint& kb = b.features[static_cast<std::size_t>(m.train_idx)].keypoint;
    const double err = reprojection_error(
        pr.homography, {{ka.x, ka.y}, {kb.x, kb.y}});
    matches.push_back({{"query", m.query_idx},
                       {"train", m.train_idx},
                       {"distance", m.distance},
                       {"reprojection_error", err},
                       {"query_kp", {ka.x, ka.y, ka.sigma, ka.orientation}},
                       {"train_kp", {kb.x, kb.y, kb.sigma, kb.orientation}}});
  }
  report["matches"] = matches;
  return report;
}

inline nlohmann::json ranking_json(const RankedResult& ranked) {
  nlohmann::json results = nlohmann::json::array();
  for (const auto& e : ranked.ranked) {
    results.push_back({{"image", e.image},
                       {"clip", e.clip},
                       {"score", e.score},
                       {"n_matches", e.n_matches},
                       {"mean_distance", e.mean_distance}});
  }
  return {{"query", ranked.query}, {"results", results}};
}

inline std::string ranking_csv(const RankedResult& ranked) {
  std::string out = "image,clip,score,n_matches,mean_distance\n";
  char buf[160];
  for (const auto& e : ranked.ranked) {
    std::snprintf(buf, sizeof(buf), "%s,%s,%.9g,%d,%.9g\n", e.image.c_str(), e.clip.c_str(), e.score,
                  e.n_matches, e.mean_distance);
    out += buf;
  }
  return out;
}

inline RankedResult cmd_rank(const std::string& query, const std::filesystem::path& features_dir,
                             const std::optional<std::filesystem::path>& labels_csv,
                             const PipelineConfig& cfg) {
  const DatasetIndex index = build_index(features_dir, labels_csv);
  const FeatureStore store = FeatureStore::load(index);
  return rank_matches(query, index, store, cfg.match_config());
}

inline nlohmann::json table_json(const LabelTable& table) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : table.rows) {
    rows.push_back({{"label", r.label},
                    {"correct", r.correct},
                    {"incorrect", r.incorrect},
                    {"total", r.total},
                    {"accuracy", r.accuracy}});
  }
  return {{"x", table.x},
          {"rows", rows},
          {"overall",
           {{"correct", table.overall.correct},
            {"incorrect", table.overall.incorrect},
            {"total", table.overall.total},
            {"accuracy", table.overall.accuracy}}}};
}

inline LabelTable cmd_evaluate(const std::filesystem::path& features_dir,
                               const std::filesystem::path& labels_csv, int x,
                               const PipelineConfig& cfg, int threads = 0) {
  const DatasetIndex index = build_index(features_dir, labels_csv);
  const FeatureStore store = FeatureStore::load(index);
  return evaluate_topx(index, x, store, cfg.match_config(), threads);
}

inline DatasetIndex cmd_synth(const SynthSpec& spec) { return generate_synthetic_benchmark(spec); }

// Renders the side-by-side overlay for a stored pair-match report.
inline void cmd_visualize(const std::filesystem::path& image_a, const std::filesystem::path& image_b,
                          const std::filesystem::path& report_path,
                          const std::filesystem::path& out_image) {
  auto to_rgb = [](PnmImage img) {
    if (std::holds_alternative<RgbImage>(img)) return std::get<RgbImage>(std::move(img));
    return gray_to_rgb(std::get<GrayImage>(img));
  };
  const RgbImage a = to_rgb(load_pnm(image_a));
  const RgbImage b = to_rgb(load_pnm(image_b));

  std::ifstream in(report_path);
  if (!in) throw IoError("cannot open report " + report_path.string());
  nlohmann::json report = nlohmann::json::parse(in, nullptr, false);
  if (report.is_discarded()) throw DecodeError("malformed report JSON: " + report_path.string());

  std::vector<OverlayMatch> matches;
  if (report.contains("matches")) {
    for (const auto& m : report["matches"]) {
      OverlayMatch om;
      om.ax = m["query_kp"][0].get<float>();
      om.ay = m["query_kp"][1].get<float>();
      om.asigma = m["query_kp"][2].get<float>();
      om.bx = m["train_kp"][0].get<float>();
      om.by = m["train_kp"][1].get<float>();
      om.bsigma = m["train_kp"][2].get<float>();
      matches.push_back(om);
    }
  }
  write_bytes(out_image, encode_pnm(render_match_overlay(a, b, matches)));
}

}  // namespace kakamatch
