#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "kakamatch/segment.hpp"
#include "support.hpp"

using namespace kakamatch;

namespace {

// Small flood-fill reference used to cross-check blob removal on synthetic
// masks.
std::vector<std::size_t> component_areas(const BinaryMask& mask) {
  std::vector<std::size_t> areas;
  std::vector<std::uint8_t> seen(mask.data.size(), 0);
  for (std::size_t start = 0; start < mask.data.size(); ++start) {
    if (!mask.data[start] || seen[start]) continue;
    std::size_t area = 0;
    std::vector<std::size_t> stack{start};
    seen[start] = 1;
    while (!stack.empty()) {
      const std::size_t idx = stack.back();
      stack.pop_back();
      ++area;
      const int x = static_cast<int>(idx % static_cast<std::size_t>(mask.width));
      const int y = static_cast<int>(idx / static_cast<std::size_t>(mask.width));
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const int nx = x + dx, ny = y + dy;
          if ((dx == 0 && dy == 0) || nx < 0 || ny < 0 || nx >= mask.width || ny >= mask.height) continue;
          const std::size_t nidx = static_cast<std::size_t>(ny) * mask.width + nx;
          if (mask.data[nidx] && !seen[nidx]) {
            seen[nidx] = 1;
            stack.push_back(nidx);
          }
        }
      }
    }
    areas.push_back(area);
  }
  return areas;
}

GrayImage gray_from(std::initializer_list<float> vals, int w, int h) {
  GrayImage img(w, h);
  std::size_t i = 0;
  for (float v : vals) img.data[i++] = v;
  return img;
}

}  // namespace

TEST_CASE("kmeans separates two value groups") {
  const GrayImage img = gray_from({0.f, 0.f, 1.f, 1.f}, 4, 1);
  KMeansParams params;
  params.seed = 5;
  const LabelMap map = kmeans_segment(img, 2, params);
  std::set<float> centroid_vals = {map.centroids[0][0], map.centroids[1][0]};
  REQUIRE(centroid_vals == std::set<float>{0.f, 1.f});
  REQUIRE(map.labels[0] == map.labels[1]);
  REQUIRE(map.labels[2] == map.labels[3]);
  REQUIRE(map.labels[0] != map.labels[2]);
}

TEST_CASE("kmeans on a constant image puts everything in one cluster") {
  GrayImage img(6, 6, 0.4f);
  KMeansParams params;
  params.seed = 11;
  KMeansTrace trace;
  const LabelMap map = kmeans_segment(img, 2, params, &trace);
  const std::int32_t first = map.labels[0];
  for (auto l : map.labels) REQUIRE(l == first);
  REQUIRE(trace.sse.back() == 0.0);
}

TEST_CASE("kmeans rejects k < 1") {
  GrayImage img(4, 4, 0.f);
  REQUIRE_THROWS_AS(kmeans_segment(img, 0, KMeansParams{}), ArgumentError);
}

TEST_CASE("kmeans is deterministic for a fixed seed") {
  const GrayImage img = testsupport::textured_image(32, 24, 17);
  KMeansParams params;
  params.seed = 99;
  const LabelMap a = kmeans_segment(img, 3, params);
  const LabelMap b = kmeans_segment(img, 3, params);
  REQUIRE(a.labels == b.labels);
  REQUIRE(a.centroids == b.centroids);
}

TEST_CASE("kmeans SSE is non-increasing across iterations") {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const GrayImage img = testsupport::textured_image(24, 24, 1000 + seed);
    KMeansParams params;
    params.seed = seed;
    params.tol = 1e-9;
    KMeansTrace trace;
    kmeans_segment(img, 4, params, &trace);
    for (std::size_t i = 1; i < trace.sse.size(); ++i) {
      REQUIRE(trace.sse[i] <= trace.sse[i - 1] + 1e-12);
    }
  }
}

TEST_CASE("kmeans on rgb images clusters in rgb space") {
  RgbImage img(4, 1);
  auto set = [&](int x, int r, int g, int b) {
    img.at(x, 0, 0) = static_cast<std::uint8_t>(r);
    img.at(x, 0, 1) = static_cast<std::uint8_t>(g);
    img.at(x, 0, 2) = static_cast<std::uint8_t>(b);
  };
  set(0, 250, 0, 0);
  set(1, 255, 5, 0);
  set(2, 0, 250, 5);
  set(3, 0, 255, 0);
  KMeansParams params;
  params.seed = 2;
  const LabelMap map = kmeans_segment(img, 2, params);
  REQUIRE(map.dim == 3);
  REQUIRE(map.labels[0] == map.labels[1]);
  REQUIRE(map.labels[2] == map.labels[3]);
  REQUIRE(map.labels[0] != map.labels[2]);
}

TEST_CASE("normalize_mask maps the brighter centroid to background") {
  LabelMap labels;
  labels.width = 2;
  labels.height = 1;
  labels.k = 2;
  labels.dim = 1;
  labels.labels = {0, 1};
  labels.centroids = {{0.1f, 0, 0}, {0.9f, 0, 0}};
  const BinaryMask mask = normalize_mask(labels);
  REQUIRE(mask.at(0, 0) == 1);  // dark cluster is the subject
  REQUIRE(mask.at(1, 0) == 0);  // bright cluster is background
}

TEST_CASE("normalize_mask is invariant to cluster index permutation") {
  const GrayImage img = testsupport::textured_image(16, 16, 8);
  KMeansParams params;
  params.seed = 3;
  LabelMap map = kmeans_segment(img, 2, params);
  const BinaryMask direct = normalize_mask(map);

  LabelMap swapped = map;
  for (auto& l : swapped.labels) l = 1 - l;
  std::swap(swapped.centroids[0], swapped.centroids[1]);
  REQUIRE(normalize_mask(swapped) == direct);
}

TEST_CASE("normalize_mask border-majority marks the border-owning cluster") {
  // dark blob centred on a white field
  GrayImage img(9, 9, 0.9f);
  for (int y = 3; y <= 5; ++y) {
    for (int x = 3; x <= 5; ++x) img.at(x, y) = 0.1f;
  }
  KMeansParams params;
  params.seed = 4;
  const LabelMap map = kmeans_segment(img, 2, params);
  const BinaryMask mask = normalize_mask(map, BackgroundPolicy::BorderMajority);
  REQUIRE(mask.at(4, 4) == 1);
  REQUIRE(mask.at(0, 0) == 0);
}

TEST_CASE("normalize_mask requires k = 2") {
  LabelMap labels;
  labels.k = 3;
  REQUIRE_THROWS_AS(normalize_mask(labels), ArgumentError);
}

TEST_CASE("remove_small_blobs thresholds strictly") {
  BinaryMask mask(8, 8);
  mask.at(1, 1) = mask.at(2, 1) = mask.at(1, 2) = 1;  // 3 pixels
  REQUIRE(remove_small_blobs(mask, 4) == BinaryMask(8, 8));

  mask.at(2, 2) = 1;  // now 4 pixels
  REQUIRE(remove_small_blobs(mask, 4) == mask);
}

TEST_CASE("remove_small_blobs keeps large components, cross-checked by flood fill") {
  BinaryMask mask(40, 40);
  // 10-pixel strip
  for (int x = 2; x < 12; ++x) mask.at(x, 2) = 1;
  // ~500-pixel block (25x20)
  for (int y = 10; y < 30; ++y) {
    for (int x = 10; x < 35; ++x) mask.at(x, y) = 1;
  }
  {
    const auto areas = component_areas(mask);
    REQUIRE(areas.size() == 2);
  }
  const BinaryMask cleaned = remove_small_blobs(mask, 100);
  const auto areas = component_areas(cleaned);
  REQUIRE(areas.size() == 1);
  REQUIRE(areas[0] == 500);
  REQUIRE(cleaned.at(2, 2) == 0);
}

TEST_CASE("remove_small_blobs uses 8-connectivity") {
  BinaryMask mask(4, 4);
  mask.at(0, 0) = 1;
  mask.at(1, 1) = 1;  // diagonal neighbours form one component of size 2
  REQUIRE(remove_small_blobs(mask, 2) == mask);
  REQUIRE(remove_small_blobs(mask, 3) == BinaryMask(4, 4));
}

TEST_CASE("remove_small_blobs is idempotent") {
  testsupport::Rng rng(123);
  for (int trial = 0; trial < 20; ++trial) {
    BinaryMask mask(16, 16);
    for (auto& v : mask.data) v = rng.next_below(4) == 0 ? 1 : 0;
    const BinaryMask once = remove_small_blobs(mask, 5);
    REQUIRE(remove_small_blobs(once, 5) == once);
  }
}

TEST_CASE("superimpose keeps only the double-ones") {
  BinaryMask fg(2, 2), bg(2, 2);
  fg.at(0, 0) = 1;
  bg.at(0, 0) = 1;  // both -> 1.0
  fg.at(1, 0) = 1;  // fg only -> 0
  bg.at(0, 1) = 1;  // bg only -> 0
  const SoftMask out = superimpose(fg, bg);
  REQUIRE(out.at(0, 0) == 1.f);
  REQUIRE(out.at(1, 0) == 0.f);
  REQUIRE(out.at(0, 1) == 0.f);
  REQUIRE(out.at(1, 1) == 0.f);
}

TEST_CASE("superimpose identities") {
  BinaryMask fg(5, 4);
  fg.at(2, 2) = fg.at(3, 2) = 1;
  BinaryMask ones(5, 4, 1);
  const SoftMask same = superimpose(fg, ones);
  for (std::size_t i = 0; i < same.data.size(); ++i) {
    REQUIRE(same.data[i] == static_cast<float>(fg.data[i]));
  }
  BinaryMask zeros(5, 4, 0);
  for (float v : superimpose(zeros, ones).data) REQUIRE(v == 0.f);

  BinaryMask wrong(4, 4);
  REQUIRE_THROWS_AS(superimpose(fg, wrong), ArgumentError);
}

TEST_CASE("superimpose support is contained in both inputs") {
  testsupport::Rng rng(9);
  BinaryMask fg(12, 12), bg(12, 12);
  for (auto& v : fg.data) v = rng.next_below(2) ? 1 : 0;
  for (auto& v : bg.data) v = rng.next_below(2) ? 1 : 0;
  const SoftMask out = superimpose(fg, bg);
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    if (out.data[i] > 0.f) {
      REQUIRE(fg.data[i] == 1);
      REQUIRE(bg.data[i] == 1);
    }
  }
}

namespace {

// Synthetic feeder scene: dark ellipse subject + dark nozzle rectangle on a
// white field. The background frame contains only the rectangle.
struct NozzleScene {
  GrayImage foreground;
  GrayImage background;
  BinaryMask subject_support;
  BinaryMask nozzle_support;
};

NozzleScene make_nozzle_scene(int w = 160, int h = 160) {
  NozzleScene scene{GrayImage(w, h, 0.92f), GrayImage(w, h, 0.92f), BinaryMask(w, h), BinaryMask(w, h)};
  // nozzle: 22x18 rectangle near the top (396 px, under the 2% blob threshold)
  for (int y = 8; y < 26; ++y) {
    for (int x = 70; x < 92; ++x) {
      scene.foreground.at(x, y) = 0.15f;
      scene.background.at(x, y) = 0.15f;
      scene.nozzle_support.at(x, y) = 1;
    }
  }
  // subject: large ellipse low-centre; big enough that the blur's edge erosion
  // costs well under 10% of its area
  const double cx = w / 2.0, cy = h * 0.62, a = 60.0, b = 45.0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double ex = (x - cx) / a, ey = (y - cy) / b;
      if (ex * ex + ey * ey <= 1.0) {
        scene.foreground.at(x, y) = 0.35f;
        scene.subject_support.at(x, y) = 1;
      }
    }
  }
  return scene;
}

}  // namespace

TEST_CASE("build_localisation_mask keeps the subject and drops the nozzle") {
  const NozzleScene scene = make_nozzle_scene();
  MaskConfig cfg;
  cfg.kmeans.seed = 77;
  const SoftMask mask = build_localisation_mask(scene.foreground, scene.background, cfg);

  std::size_t nozzle_zero = 0, nozzle_total = 0;
  std::size_t subject_kept = 0, subject_total = 0;
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      if (scene.nozzle_support.at(x, y)) {
        ++nozzle_total;
        if (mask.at(x, y) == 0.f) ++nozzle_zero;
      }
      if (scene.subject_support.at(x, y)) {
        ++subject_total;
        if (mask.at(x, y) >= 0.75f) ++subject_kept;
      }
    }
  }
  REQUIRE(nozzle_zero == nozzle_total);
  REQUIRE(static_cast<double>(subject_kept) / static_cast<double>(subject_total) > 0.9);
  for (float v : mask.data) {
    REQUIRE(v >= 0.f);
    REQUIRE(v <= 1.f);
  }
}

TEST_CASE("build_localisation_mask stepwise equals its composition") {
  const NozzleScene scene = make_nozzle_scene();
  MaskConfig cfg;
  cfg.kmeans.seed = 77;

  const auto fg_labels = kmeans_segment(scene.foreground, 2, cfg.kmeans);
  const auto bg_labels = kmeans_segment(scene.background, 2, cfg.kmeans);
  const std::size_t min_area = static_cast<std::size_t>(
      cfg.min_blob_frac * scene.foreground.width * scene.foreground.height + 0.5);
  const SoftMask expected =
      mean_blur(superimpose(remove_small_blobs(normalize_mask(fg_labels, cfg.bg_policy), min_area),
                            invert_mask(normalize_mask(bg_labels, cfg.bg_policy))),
                cfg.blur);
  REQUIRE(build_localisation_mask(scene.foreground, scene.background, cfg) == expected);
}

TEST_CASE("build_localisation_mask on a subject-free frame is near-zero") {
  NozzleScene scene = make_nozzle_scene();
  MaskConfig cfg;
  cfg.kmeans.seed = 77;
  // foreground identical to background: only the nozzle blob, removed by area
  const SoftMask mask = build_localisation_mask(scene.background, scene.background, cfg);
  std::size_t nonzero = 0;
  for (float v : mask.data) nonzero += v > 0.f ? 1 : 0;
  REQUIRE(nonzero == 0);
}

TEST_CASE("build_localisation_mask of a blank scene is all zero") {
  GrayImage white(64, 64, 0.95f);
  MaskConfig cfg;
  cfg.kmeans.seed = 1;
  const SoftMask mask = build_localisation_mask(white, white, cfg);
  for (float v : mask.data) REQUIRE(v == 0.f);
}

TEST_CASE("blur never spreads support past the window radius") {
  const NozzleScene scene = make_nozzle_scene();
  MaskConfig cfg;
  cfg.kmeans.seed = 77;
  const auto fg_labels = kmeans_segment(scene.foreground, 2, cfg.kmeans);
  const auto bg_labels = kmeans_segment(scene.background, 2, cfg.kmeans);
  const std::size_t min_area = static_cast<std::size_t>(
      cfg.min_blob_frac * scene.foreground.width * scene.foreground.height + 0.5);
  const SoftMask pre_blur =
      superimpose(remove_small_blobs(normalize_mask(fg_labels, cfg.bg_policy), min_area),
                  invert_mask(normalize_mask(bg_labels, cfg.bg_policy)));
  const SoftMask blurred = mean_blur(pre_blur, cfg.blur);
  const int r = cfg.blur / 2;
  for (int y = 0; y < blurred.height; ++y) {
    for (int x = 0; x < blurred.width; ++x) {
      if (blurred.at(x, y) <= 0.f) continue;
      bool near_support = false;
      for (int dy = -r; dy <= r && !near_support; ++dy) {
        for (int dx = -r; dx <= r; ++dx) {
          const int nx = x + dx, ny = y + dy;
          if (nx < 0 || ny < 0 || nx >= blurred.width || ny >= blurred.height) continue;
          if (pre_blur.at(nx, ny) > 0.f) {
            near_support = true;
            break;
          }
        }
      }
      REQUIRE(near_support);
    }
  }
}

TEST_CASE("select_frame probes (w/2, 4h/5) against 50") {
  GrayImage img(10, 10, 0.f);
  REQUIRE_FALSE(select_frame(img));  // all black

  img.at(5, 8) = 51.f / 255.f;
  REQUIRE(select_frame(img));

  img.at(5, 8) = 50.f / 255.f;
  REQUIRE_FALSE(select_frame(img));  // threshold is strict
}
