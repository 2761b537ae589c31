#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kakamatch/error.hpp"
#include "kakamatch/feature_io.hpp"
#include "kakamatch/matching.hpp"
#include "kakamatch/rng.hpp"
#include "kakamatch/sift.hpp"

namespace kakamatch {

// S(D) = |D| + 1 / (1 + mean(D)). More matches always outrank fewer; at equal
// counts a lower mean descriptor distance wins. Range (|D|, |D|+1].
inline double similarity_score(std::span<const double> distances) {
  if (distances.empty()) throw ArgumentError("similarity_score: empty distance set");
  double sum = 0.0;
  for (double d : distances) sum += d;
  const double mean = sum / static_cast<double>(distances.size());
  return static_cast<double>(distances.size()) + 1.0 / (1.0 + mean);
}

struct PairResult {
  std::string image_a;
  std::string image_b;
  int n_matches = 0;          // surviving (inlier) matches
  int n_preliminary = 0;      // matches before mismatch removal
  double mean_distance = 0.0;
  double score = 0.0;
  MatchSet inliers;
  Homography homography;
};

struct MatchConfig {
  MatchStrategy strategy = MatchStrategy::Mnn;
  double ratio = 0.8;  // NNDR only
  int ransac_iters = 1000;
  double ransac_inlier_px = 3.0;
  std::uint64_t seed = 0;
};

// Descriptor matrix and keypoint positions for one image, derived from its
// feature list once and reused across every pairing.
struct ImageFeatures {
  std::vector<Feature> features;
  DescriptorMatrix descriptors;
  std::vector<Point2> points;

  static ImageFeatures from(std::vector<Feature> f) {
    ImageFeatures out;
    out.descriptors.count = f.size();
    out.descriptors.dim = 128;
    out.descriptors.data.reserve(f.size() * 128);
    out.points.reserve(f.size());
    for (const Feature& feat : f) {
      out.descriptors.data.insert(out.descriptors.data.end(), feat.descriptor.values.begin(),
                                  feat.descriptor.values.end());
      out.points.push_back({feat.keypoint.x, feat.keypoint.y});
    }
    out.features = std::move(f);
    return out;
  }
};

// RANSAC sampling is seeded per ordered pair so rankings are reproducible
// regardless of evaluation order or thread count.
inline std::uint64_t pair_seed(std::uint64_t seed, const std::string& id_a, const std::string& id_b) {
  return stage_seed("ransac", seed) ^ fnv1a64(id_a + ">" + id_b);
}

// The ways a pairing can end without a score.
enum class PairStatus {
  Ok,
  EmptyFeatures,        // one side has too few descriptors to even match
  InsufficientMatches,  // fewer than 4 preliminary matches for RANSAC
  NoConsensus,          // RANSAC found no 4-inlier transform
};

struct PairOutcome {
  PairStatus status = PairStatus::EmptyFeatures;
  int n_preliminary = 0;
  std::optional<PairResult> result;
};

// Preliminary matching (per strategy) followed by RANSAC mismatch removal and
// scoring.
inline PairOutcome evaluate_pair(const ImageFeatures& a, const ImageFeatures& b,
                                 const MatchConfig& cfg, const std::string& id_a = "a",
                                 const std::string& id_b = "b") {
  PairOutcome out;
  // Sets too small for the chosen strategy cannot match at all.
  if (a.descriptors.count == 0 || b.descriptors.count == 0) return out;
  if (cfg.strategy == MatchStrategy::Nndr && b.descriptors.count < 2) return out;

  MatchSet prelim;
  switch (cfg.strategy) {
    case MatchStrategy::Nn: prelim = match_nn(a.descriptors, b.descriptors); break;
    case MatchStrategy::Mnn: prelim = match_mnn(a.descriptors, b.descriptors); break;
    case MatchStrategy::Nndr: prelim = match_nndr(a.descriptors, b.descriptors, cfg.ratio); break;
  }
  out.n_preliminary = static_cast<int>(prelim.matches.size());

  RansacConfig rc;
  rc.iters = cfg.ransac_iters;
  rc.inlier_px = cfg.ransac_inlier_px;
  rc.seed = pair_seed(cfg.seed, id_a, id_b);
  const RansacResult rr = ransac_filter(prelim, a.points, b.points, rc);
  if (rr.status == RansacStatus::InsufficientMatches) {
    out.status = PairStatus::InsufficientMatches;
    return out;
  }
  if (rr.status == RansacStatus::NoConsensus) {
    out.status = PairStatus::NoConsensus;
    return out;
  }

  out.status = PairStatus::Ok;
  PairResult res;
  res.image_a = id_a;
  res.image_b = id_b;
  res.n_preliminary = out.n_preliminary;
  res.n_matches = static_cast<int>(rr.inliers.matches.size());
  std::vector<double> distances;
  distances.reserve(rr.inliers.matches.size());
  for (const auto& m : rr.inliers.matches) distances.push_back(m.distance);
  res.score = similarity_score(distances);
  double sum = 0.0;
  for (double d : distances) sum += d;
  res.mean_distance = sum / static_cast<double>(distances.size());
  res.inliers = rr.inliers;
  res.homography = rr.homography;
  out.result = std::move(res);
  return out;
}

// Returns nothing when the pair yields no usable consensus.
inline std::optional<PairResult> match_pair(const ImageFeatures& a, const ImageFeatures& b,
                                            const MatchConfig& cfg, const std::string& id_a = "a",
                                            const std::string& id_b = "b") {
  return evaluate_pair(a, b, cfg, id_a, id_b).result;
}

struct IndexEntry {
  std::string id;    // image identifier (filename stem)
  std::string clip;  // video-clip identifier parsed from the filename
  std::optional<std::string> label;
  std::filesystem::path feature_path;
};

struct DatasetIndex {
  std::vector<IndexEntry> entries;

  const IndexEntry* find(const std::string& id) const {
    for (const auto& e : entries) {
      if (e.id == id) return &e;
    }
    return nullptr;
  }
};

// <clipid>_<frameidx> filename convention; anything without an underscore is
// its own clip.
inline std::string clip_of(const std::string& image_id) {
  const std::size_t pos = image_id.rfind('_');
  return pos == std::string::npos ? image_id : image_id.substr(0, pos);
}

// labels CSV: header "filename,label", one image per row. Filenames may carry
// their image extension.
inline std::map<std::string, std::string> load_labels(const std::filesystem::path& csv) {
  std::ifstream in(csv);
  if (!in) throw IoError("cannot open " + csv.string());
  std::map<std::string, std::string> labels;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::size_t comma = line.find(',');
    if (comma == std::string::npos) throw DecodeError(csv.string() + ": malformed row '" + line + "'");
    std::string name = line.substr(0, comma);
    std::string label = line.substr(comma + 1);
    if (first) {
      first = false;
      if (name == "filename") continue;  // header
    }
    const std::size_t dot = name.rfind('.');
    if (dot != std::string::npos) {
      const std::string ext = name.substr(dot);
      if (ext == ".pgm" || ext == ".ppm" || ext == ".siftv1") name = name.substr(0, dot);
    }
    labels[name] = label;
  }
  return labels;
}

// Builds an index from a directory of .siftv1 feature files plus an optional
// labels CSV. Entries are ordered by id.
inline DatasetIndex build_index(const std::filesystem::path& features_dir,
                                const std::optional<std::filesystem::path>& labels_csv = std::nullopt) {
  if (!std::filesystem::is_directory(features_dir)) {
    throw IoError("feature directory not found: " + features_dir.string());
  }
  std::map<std::string, std::string> labels;
  if (labels_csv) labels = load_labels(*labels_csv);

  DatasetIndex index;
  for (const auto& entry : std::filesystem::directory_iterator(features_dir)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".siftv1") continue;
    IndexEntry e;
    e.id = entry.path().stem().string();
    e.clip = clip_of(e.id);
    e.feature_path = entry.path();
    if (auto it = labels.find(e.id); it != labels.end()) e.label = it->second;
    index.entries.push_back(std::move(e));
  }
  std::sort(index.entries.begin(), index.entries.end(),
            [](const IndexEntry& a, const IndexEntry& b) { return a.id < b.id; });
  return index;
}

// All features of an index loaded and prepared once; gallery matching is
// O(N) pair evaluations per query but a single parse per image.
struct FeatureStore {
  std::map<std::string, ImageFeatures> by_id;

  static FeatureStore load(const DatasetIndex& index) {
    FeatureStore store;
    for (const auto& e : index.entries) {
      store.by_id.emplace(e.id, ImageFeatures::from(load_features(e.feature_path)));
    }
    return store;
  }

  const ImageFeatures& get(const std::string& id) const {
    auto it = by_id.find(id);
    if (it == by_id.end()) throw LookupError("no features loaded for '" + id + "'");
    return it->second;
  }
};

struct RankedEntry {
  std::string image;
  std::string clip;
  double score = 0.0;
  int n_matches = 0;
  double mean_distance = 0.0;
};

struct RankedResult {
  std::string query;
  std::vector<RankedEntry> ranked;  // descending score, ties by image id ascending
};

// Scores the query against every gallery entry from a different clip and
// sorts. Pairs with no usable consensus are omitted.
inline RankedResult rank_matches(const std::string& query, const DatasetIndex& index,
                                 const FeatureStore& store, const MatchConfig& cfg) {
  const IndexEntry* q = index.find(query);
  if (!q) throw LookupError("unknown query id '" + query + "'");
  const ImageFeatures& qf = store.get(query);

  RankedResult out;
  out.query = query;
  for (const auto& e : index.entries) {
    if (e.clip == q->clip) continue;
    const auto pr = match_pair(qf, store.get(e.id), cfg, query, e.id);
    if (!pr) continue;
    out.ranked.push_back({e.id, e.clip, pr->score, pr->n_matches, pr->mean_distance});
  }
  std::sort(out.ranked.begin(), out.ranked.end(), [](const RankedEntry& a, const RankedEntry& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.image < b.image;
  });
  return out;
}

inline std::vector<std::string> top_x(const RankedResult& ranked, int x) {
  if (x < 1) throw ArgumentError("top_x: x must be >= 1");
  std::vector<std::string> out;
  const std::size_t n = std::min<std::size_t>(static_cast<std::size_t>(x), ranked.ranked.size());
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(ranked.ranked[i].image);
  return out;
}

}  // namespace kakamatch
