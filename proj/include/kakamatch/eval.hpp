#pragma once

#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "kakamatch/error.hpp"
#include "kakamatch/pnm.hpp"
#include "kakamatch/rng.hpp"
#include "kakamatch/similarity.hpp"

namespace kakamatch {

struct LabelRow {
  std::string label;
  int correct = 0;
  int incorrect = 0;
  int total = 0;
  double accuracy = 0.0;
};

struct LabelTable {
  int x = 1;
  std::vector<LabelRow> rows;  // sorted by label
  LabelRow overall;
};

// Rankings for a set of queries, evaluated in parallel. Each query's result
// is independent and deterministic, so the thread count never changes output.
inline std::vector<RankedResult> compute_rankings(const std::vector<std::string>& queries,
                                                  const DatasetIndex& index, const FeatureStore& store,
                                                  const MatchConfig& cfg, int threads = 0) {
  if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
  if (threads < 1) threads = 1;
  threads = std::min<int>(threads, std::max<int>(1, static_cast<int>(queries.size())));

  std::vector<RankedResult> results(queries.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::string error_message;
  std::mutex error_mutex;
  auto worker = [&]() {
    for (;;) {
      if (failed.load()) return;
      const std::size_t i = next.fetch_add(1);
      if (i >= queries.size()) return;
      try {
        results[i] = rank_matches(queries[i], index, store, cfg);
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(error_mutex);
        error_message = queries[i] + ": " + e.what();
        failed.store(true);
        return;
      }
    }
  };
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failed.load()) throw LookupError("ranking failed: " + error_message);
  return results;
}

// Builds the per-label accuracy table from precomputed rankings. A query is
// correct iff one of its top-x candidates is labelled with the query's label;
// unlabelled candidates and empty rankings count against it.
inline LabelTable tabulate_topx(const DatasetIndex& index, const std::vector<std::string>& queries,
                                const std::vector<RankedResult>& rankings, int x) {
  if (x < 1) throw ArgumentError("tabulate_topx: x must be >= 1");
  std::map<std::string, LabelRow> rows;
  LabelTable table;
  table.x = x;

  for (std::size_t i = 0; i < queries.size(); ++i) {
    const IndexEntry* q = index.find(queries[i]);
    if (!q || !q->label) continue;
    LabelRow& row = rows[*q->label];
    row.label = *q->label;
    bool correct = false;
    for (const std::string& hit : top_x(rankings[i], x)) {
      const IndexEntry* g = index.find(hit);
      if (g && g->label && *g->label == *q->label) {
        correct = true;
        break;
      }
    }
    ++row.total;
    if (correct) {
      ++row.correct;
    } else {
      ++row.incorrect;
    }
  }

  for (auto& [label, row] : rows) {
    row.accuracy = row.total > 0 ? static_cast<double>(row.correct) / row.total : 0.0;
    table.overall.correct += row.correct;
    table.overall.incorrect += row.incorrect;
    table.overall.total += row.total;
    table.rows.push_back(row);
  }
  table.overall.accuracy =
      table.overall.total > 0 ? static_cast<double>(table.overall.correct) / table.overall.total : 0.0;
  return table;
}

inline std::vector<std::string> labelled_queries(const DatasetIndex& index) {
  std::vector<std::string> queries;
  for (const auto& e : index.entries) {
    if (e.label) queries.push_back(e.id);
  }
  return queries;
}

// Top-x accuracy over the labelled subset of the index.
inline LabelTable evaluate_topx(const DatasetIndex& index, int x, const FeatureStore& store,
                                const MatchConfig& cfg, int threads = 0) {
  const std::vector<std::string> queries = labelled_queries(index);
  if (queries.empty()) throw ArgumentError("evaluate_topx: index has no labelled entries");
  const auto rankings = compute_rankings(queries, index, store, cfg, threads);
  return tabulate_topx(index, queries, rankings, x);
}

// Aligned-text rendering: Label / Correct / Incorrect / Total / Accuracy with
// an overall row at the bottom.
inline std::string render_table(const LabelTable& table) {
  std::size_t label_w = 7;
  for (const auto& r : table.rows) label_w = std::max(label_w, r.label.size());
  char buf[160];
  std::string out;
  std::snprintf(buf, sizeof(buf), "%-*s %9s %9s %9s %9s\n", static_cast<int>(label_w), "Label",
                "Correct", "Incorrect", "Total", "Accuracy");
  out += buf;
  auto row_line = [&](const std::string& name, const LabelRow& r) {
    std::snprintf(buf, sizeof(buf), "%-*s %9d %9d %9d %9.4f\n", static_cast<int>(label_w),
                  name.c_str(), r.correct, r.incorrect, r.total, r.accuracy);
    out += buf;
  };
  for (const auto& r : table.rows) row_line(r.label, r);
  row_line("overall", table.overall);
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic benchmark
//
// Desk-scale stand-in corpus: each individual is an ellipse with a unique
// seeded spot/stripe texture over a white field; a fixed textured dark
// rectangle plays the feeder nozzle that appears identically in every image.
// Views vary by rotation, scale, translation and sensor noise, and each view
// is its own clip.
// ---------------------------------------------------------------------------

struct SynthSpec {
  int n_individuals = 10;
  int views_per_individual = 12;
  std::uint64_t seed = 7;
  std::filesystem::path out_dir;
  int width = 256;
  int height = 256;
};

namespace detail {

struct SpotParams {
  double x = 0.0, y = 0.0;  // model coordinates relative to ellipse centre
  double radius = 4.0;
  double tone = 0.5;
};

struct IndividualModel {
  double semi_a = 60.0;  // ellipse semi-axis along model x
  double semi_b = 46.0;
  double base_tone = 0.5;
  std::vector<SpotParams> spots;
  double stripe_angle = 0.0;
  double stripe_period = 18.0;
  double stripe_gain = 0.08;
};

struct ViewParams {
  double angle = 0.0;
  double scale = 1.0;
  double tx = 0.0;
  double ty = 0.0;
};

struct NozzleModel {
  int x0 = 102, y0 = 36, x1 = 154, y1 = 88;  // half-open pixel bounds
  double base_tone = 0.13;
  std::vector<SpotParams> speckles;  // positions relative to the rect origin
  double jitter_amp = 2.5;
};

inline double smoothstep(double t) {
  t = t < 0.0 ? 0.0 : (t > 1.0 ? 1.0 : t);
  return t * t * (3.0 - 2.0 * t);
}

// All linear dimensions scale with the canvas (unit = min dim / 256), so
// other --size values keep the same scene proportions.
inline IndividualModel make_individual(std::uint64_t synth_seed, int individual, double unit) {
  Rng rng(mix_seed(synth_seed, 0x1000u + static_cast<std::uint64_t>(individual)));
  IndividualModel m;
  m.semi_a = rng.next_range(54.0, 64.0) * unit;
  m.semi_b = rng.next_range(44.0, 50.0) * unit;
  m.base_tone = rng.next_range(0.44, 0.52);
  m.stripe_angle = rng.next_range(0.0, kPi);
  m.stripe_period = rng.next_range(14.0, 26.0) * unit;
  m.stripe_gain = rng.next_range(0.05, 0.1);
  const int n_spots = 26 + static_cast<int>(rng.next_below(9));
  for (int s = 0; s < n_spots; ++s) {
    SpotParams sp;
    // Rejection-free placement on a disc, scaled into the ellipse interior.
    const double ang = rng.next_range(0.0, kTwoPi);
    const double rad = 0.88 * std::sqrt(rng.next_double());
    sp.x = rad * std::cos(ang) * m.semi_a;
    sp.y = rad * std::sin(ang) * m.semi_b;
    sp.radius = rng.next_range(3.0, 9.0) * unit;
    // spots keep a minimum contrast against the base tone yet stay inside
    // the dark k-means cluster, so the mask has no holes
    sp.tone = rng.next_double() < 0.5 ? m.base_tone - rng.next_range(0.16, 0.22)
                                      : m.base_tone + rng.next_range(0.13, 0.16);
    m.spots.push_back(sp);
  }
  return m;
}

inline NozzleModel make_nozzle(std::uint64_t synth_seed, int width, int height) {
  Rng rng(mix_seed(synth_seed, 0x2000u));
  NozzleModel n;
  n.x0 = static_cast<int>(std::lround(0.3984375 * width));
  n.x1 = static_cast<int>(std::lround(0.6015625 * width));
  n.y0 = static_cast<int>(std::lround(0.140625 * height));
  n.y1 = static_cast<int>(std::lround(0.34375 * height));
  const double unit = std::min(width, height) / 256.0;
  n.jitter_amp = 2.5 * unit;
  const double w = n.x1 - n.x0;
  const double h = n.y1 - n.y0;
  // Dense high-contrast speckle: the fixed scenery carries more stable
  // keypoints than the subject, exactly the failure mode masking exists to
  // remove. Tones stay below the bright cluster so segmentation sees one
  // dark blob.
  for (int s = 0; s < 30; ++s) {
    SpotParams sp;
    sp.x = rng.next_range(4.0 * unit, w - 4.0 * unit);
    sp.y = rng.next_range(4.0 * unit, h - 4.0 * unit);
    sp.radius = rng.next_range(2.0, 4.2) * unit;
    sp.tone = rng.next_range(0.34, 0.64);
    n.speckles.push_back(sp);
  }
  return n;
}

inline ViewParams make_view(std::uint64_t synth_seed, int individual, int view, double unit) {
  Rng rng(mix_seed(synth_seed, 0x3000u + static_cast<std::uint64_t>(individual) * 1024u +
                                   static_cast<std::uint64_t>(view)));
  ViewParams v;
  v.angle = rng.next_range(-20.0, 20.0) * kPi / 180.0;
  v.scale = rng.next_range(0.85, 1.2);
  v.tx = rng.next_range(-10.0, 10.0) * unit;
  v.ty = rng.next_range(-10.0, 10.0) * unit;
  return v;
}

inline double subject_tone(const IndividualModel& m, double mx, double my) {
  double tone = m.base_tone;
  const double stripe_coord =
      std::cos(m.stripe_angle) * mx + std::sin(m.stripe_angle) * my;
  tone += m.stripe_gain * std::sin(kTwoPi * stripe_coord / m.stripe_period);
  for (const SpotParams& sp : m.spots) {
    const double d = std::hypot(mx - sp.x, my - sp.y);
    const double cover = smoothstep((sp.radius - d) / 1.5 + 0.5);
    tone = tone * (1.0 - cover) + sp.tone * cover;
  }
  return tone < 0.28 ? 0.28 : (tone > 0.9 ? 0.9 : tone);
}

// Speckle centres shift a little from frame to frame (camera re-mounting and
// sampling wobble). A single transform cannot absorb the per-speckle part, so
// how well two frames' nozzles align is a random draw, independent of which
// subject they contain.
inline std::vector<std::pair<double, double>> nozzle_jitter(const NozzleModel& n,
                                                            std::uint64_t frame_key) {
  std::vector<std::pair<double, double>> out;
  Rng rng(mix_seed(frame_key, 0x4000u));
  out.reserve(n.speckles.size());
  for (std::size_t i = 0; i < n.speckles.size(); ++i) {
    out.emplace_back(rng.next_range(-n.jitter_amp, n.jitter_amp),
                     rng.next_range(-n.jitter_amp, n.jitter_amp));
  }
  return out;
}

inline double nozzle_tone(const NozzleModel& n, double px, double py,
                          const std::vector<std::pair<double, double>>& jitter) {
  double tone = n.base_tone;
  for (std::size_t i = 0; i < n.speckles.size(); ++i) {
    const SpotParams& sp = n.speckles[i];
    const double d =
        std::hypot(px - (n.x0 + sp.x + jitter[i].first), py - (n.y0 + sp.y + jitter[i].second));
    const double cover = smoothstep((sp.radius - d) / 1.2 + 0.5);
    tone = tone * (1.0 - cover) + sp.tone * cover;
  }
  return tone;
}

inline GrayImage render_scene(const SynthSpec& spec, const NozzleModel& nozzle,
                              const IndividualModel* subject, const ViewParams* view,
                              std::uint64_t noise_key) {
  GrayImage img(spec.width, spec.height, 0.93f);
  const double cx = spec.width / 2.0;
  const double cy = spec.height * 0.71;  // subject anchor; keeps the probe point covered
  const auto jitter = nozzle_jitter(nozzle, noise_key);

  for (int y = 0; y < spec.height; ++y) {
    for (int x = 0; x < spec.width; ++x) {
      double tone = 0.93;
      if (x >= nozzle.x0 && x < nozzle.x1 && y >= nozzle.y0 && y < nozzle.y1) {
        tone = nozzle_tone(nozzle, x, y, jitter);
      }
      if (subject && view) {
        const double dx = (x - cx - view->tx) / view->scale;
        const double dy = (y - cy - view->ty) / view->scale;
        const double mx = std::cos(-view->angle) * dx - std::sin(-view->angle) * dy;
        const double my = std::sin(-view->angle) * dx + std::cos(-view->angle) * dy;
        const double e = (mx / subject->semi_a) * (mx / subject->semi_a) +
                         (my / subject->semi_b) * (my / subject->semi_b);
        if (e <= 1.0) tone = subject_tone(*subject, mx, my);
      }
      img.at(x, y) = static_cast<float>(tone);
    }
  }

  Rng noise(noise_key);
  for (float& v : img.data) {
    v = static_cast<float>(v + noise.next_gaussian() * (2.0 / 255.0));
    v = v < 0.f ? 0.f : (v > 1.f ? 1.f : v);
  }
  return img;
}

}  // namespace detail

// Writes out_dir/images/<clip>_0.pgm for every (individual, view), the shared
// nozzle-only background frame, and labels.csv. Byte-identical for a fixed
// seed. The returned index points at the conventional feature-cache location
// (out_dir/features) which the extraction step fills in later.
inline DatasetIndex generate_synthetic_benchmark(const SynthSpec& spec) {
  if (spec.n_individuals < 2) throw ArgumentError("generate_synthetic_benchmark: need >= 2 individuals");
  if (spec.views_per_individual < 2) throw ArgumentError("generate_synthetic_benchmark: need >= 2 views");
  if (spec.width < 64 || spec.height < 64) {
    throw ArgumentError("generate_synthetic_benchmark: canvas must be at least 64x64");
  }

  const std::uint64_t synth_seed = stage_seed("synth", spec.seed);
  namespace fs = std::filesystem;
  fs::create_directories(spec.out_dir / "images");

  const double unit = std::min(spec.width, spec.height) / 256.0;
  const detail::NozzleModel nozzle = detail::make_nozzle(synth_seed, spec.width, spec.height);

  DatasetIndex index;
  std::string labels_csv = "filename,label\n";
  char name[64];
  for (int ind = 0; ind < spec.n_individuals; ++ind) {
    const detail::IndividualModel model = detail::make_individual(synth_seed, ind, unit);
    for (int view = 0; view < spec.views_per_individual; ++view) {
      const detail::ViewParams vp = detail::make_view(synth_seed, ind, view, unit);
      std::snprintf(name, sizeof(name), "ind%02dv%02d_0", ind, view);
      const std::string id(name);
      const GrayImage img =
          detail::render_scene(spec, nozzle, &model, &vp, mix_seed(synth_seed, fnv1a64(id)));
      write_bytes(spec.out_dir / "images" / (id + ".pgm"), encode_pnm(img));

      std::snprintf(name, sizeof(name), "ind%02d", ind);
      labels_csv += id + ".pgm," + name + "\n";

      IndexEntry e;
      e.id = id;
      e.clip = clip_of(id);
      e.label = std::string(name);
      e.feature_path = spec.out_dir / "features" / (id + ".siftv1");
      index.entries.push_back(std::move(e));
    }
  }

  const GrayImage background =
      detail::render_scene(spec, nozzle, nullptr, nullptr, mix_seed(synth_seed, fnv1a64("background")));
  write_bytes(spec.out_dir / "background.pgm", encode_pnm(background));

  std::ofstream csv(spec.out_dir / "labels.csv", std::ios::binary);
  if (!csv) throw IoError("cannot write labels.csv");
  csv << labels_csv;
  return index;
}

}  // namespace kakamatch
