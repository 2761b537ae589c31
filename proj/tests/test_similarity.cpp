#include <catch2/catch_amalgamated.hpp>

#include "kakamatch/feature_io.hpp"
#include "kakamatch/similarity.hpp"
#include "support.hpp"

using namespace kakamatch;

namespace {

// Toy feature factory: unit-ish descriptors that are far apart between
// different codes, positions generic enough for homography fitting.
Feature make_feature(float x, float y, int code) {
  Feature f;
  f.keypoint.x = x;
  f.keypoint.y = y;
  f.keypoint.sigma = 2.f;
  f.keypoint.orientation = 0.5f;
  f.keypoint.response = 0.1f;
  Rng rng(static_cast<std::uint64_t>(code) * 7919u + 13u);
  double norm = 0.0;
  for (auto& v : f.descriptor.values) {
    v = static_cast<float>(rng.next_double());
    norm += static_cast<double>(v) * v;
  }
  norm = std::sqrt(norm);
  for (auto& v : f.descriptor.values) v = static_cast<float>(v / norm);
  return f;
}

std::vector<Feature> feature_block(int base_code, int count = 8) {
  std::vector<Feature> out;
  Rng rng(static_cast<std::uint64_t>(base_code) + 5000u);
  for (int i = 0; i < count; ++i) {
    out.push_back(make_feature(static_cast<float>(rng.next_range(5.0, 95.0)),
                               static_cast<float>(rng.next_range(5.0, 95.0)), base_code * 100 + i));
  }
  return out;
}

}  // namespace

TEST_CASE("similarity_score matches the closed form") {
  const std::vector<double> zeros4 = {0, 0, 0, 0};
  REQUIRE(similarity_score(zeros4) == 5.0);

  const std::vector<double> two = {100, 200};
  REQUIRE(similarity_score(two) == Catch::Approx(2.0 + 1.0 / 151.0).epsilon(1e-12));

  const std::vector<double> huge = {1e12};
  REQUIRE(similarity_score(huge) > 1.0);
  REQUIRE(similarity_score(huge) == Catch::Approx(1.0).margin(1e-9));

  REQUIRE_THROWS_AS(similarity_score(std::vector<double>{}), ArgumentError);
}

TEST_CASE("similarity_score lies in (|D|, |D|+1] and obeys both orderings") {
  Rng rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n1 = 1 + rng.next_below(40);
    const std::size_t n2 = 1 + rng.next_below(40);
    std::vector<double> d1(n1), d2(n2);
    for (auto& d : d1) d = rng.next_range(0.0, 500.0);
    for (auto& d : d2) d = rng.next_range(0.0, 500.0);
    const double s1 = similarity_score(d1);
    const double s2 = similarity_score(d2);
    REQUIRE(s1 > static_cast<double>(n1));
    REQUIRE(s1 <= static_cast<double>(n1) + 1.0);
    if (n1 > n2) REQUIRE(s1 > s2);
    if (n2 > n1) REQUIRE(s2 > s1);
  }
  // equal |D|: lower mean distance ranks strictly higher
  const std::vector<double> low = {1, 2, 3};
  const std::vector<double> high = {1, 2, 4};
  REQUIRE(similarity_score(low) > similarity_score(high));
}

TEST_CASE("match_pair of an image with itself scores |D| + 1") {
  const auto feats = ImageFeatures::from(feature_block(1, 10));
  MatchConfig cfg;
  const auto pr = match_pair(feats, feats, cfg, "q", "q2");
  REQUIRE(pr.has_value());
  REQUIRE(pr->n_matches == 10);
  REQUIRE(pr->mean_distance == 0.0);
  REQUIRE(pr->score == 11.0);
}

TEST_CASE("match_pair with an empty side is no-match") {
  const auto feats = ImageFeatures::from(feature_block(2));
  const auto empty = ImageFeatures::from({});
  MatchConfig cfg;
  REQUIRE_FALSE(match_pair(feats, empty, cfg).has_value());
  REQUIRE_FALSE(match_pair(empty, feats, cfg).has_value());
  REQUIRE(evaluate_pair(feats, empty, cfg).status == PairStatus::EmptyFeatures);
}

TEST_CASE("match_pair flags too-few preliminary matches distinctly") {
  const auto a = ImageFeatures::from({make_feature(10, 10, 1), make_feature(30, 40, 2)});
  const auto b = ImageFeatures::from({make_feature(12, 11, 1), make_feature(31, 41, 2)});
  MatchConfig cfg;
  const auto outcome = evaluate_pair(a, b, cfg);
  REQUIRE(outcome.status == PairStatus::InsufficientMatches);
  REQUIRE(outcome.n_preliminary == 2);
}

TEST_CASE("pair result invariants hold") {
  const auto a = ImageFeatures::from(feature_block(3, 12));
  std::vector<Feature> noisy = a.features;
  // small positional jitter, same descriptors: identity-consistent matches
  Rng rng(8);
  for (auto& f : noisy) {
    f.keypoint.x += static_cast<float>(rng.next_gaussian() * 0.3);
    f.keypoint.y += static_cast<float>(rng.next_gaussian() * 0.3);
  }
  const auto b = ImageFeatures::from(std::move(noisy));
  MatchConfig cfg;
  const auto pr = match_pair(a, b, cfg, "x", "y");
  REQUIRE(pr.has_value());
  REQUIRE(pr->n_matches >= 4);
  REQUIRE(pr->score > pr->n_matches);
  REQUIRE(pr->score <= pr->n_matches + 1);
}

TEST_CASE("clip_of parses the filename convention") {
  REQUIRE(clip_of("clip3_17") == "clip3");
  REQUIRE(clip_of("ind02v11_0") == "ind02v11");
  REQUIRE(clip_of("a_b_c") == "a_b");
  REQUIRE(clip_of("noclip") == "noclip");
}

TEST_CASE("feature files round-trip exactly through 9 significant digits") {
  const auto feats = feature_block(9, 6);
  testsupport::TempDir tmp("featio");
  const auto path = tmp.path() / "img_0.siftv1";
  save_features(path, feats);
  const auto loaded = load_features(path);
  REQUIRE(loaded.size() == feats.size());
  for (std::size_t i = 0; i < feats.size(); ++i) {
    REQUIRE(loaded[i].keypoint.x == feats[i].keypoint.x);
    REQUIRE(loaded[i].keypoint.y == feats[i].keypoint.y);
    REQUIRE(loaded[i].keypoint.sigma == feats[i].keypoint.sigma);
    REQUIRE(loaded[i].keypoint.orientation == feats[i].keypoint.orientation);
    REQUIRE(loaded[i].keypoint.response == feats[i].keypoint.response);
    REQUIRE(loaded[i].descriptor.values == feats[i].descriptor.values);
  }
}

TEST_CASE("feature parser rejects malformed input") {
  REQUIRE_THROWS_AS(parse_features("bogus\n"), DecodeError);
  REQUIRE_THROWS_AS(parse_features("SIFTv1 2\n{\"kp\":[1,2,3,4,5],\"d\":[]}\n"), DecodeError);
  REQUIRE_THROWS_AS(parse_features("SIFTv1 5\n"), DecodeError);
  REQUIRE_THROWS_AS(parse_features("SIFTv1 abc\n"), DecodeError);
}

namespace {

// Writes a toy gallery to disk and returns its index + store.
struct ToyGallery {
  testsupport::TempDir tmp{"gallery"};
  DatasetIndex index;
  FeatureStore store;

  void add(const std::string& id, const std::vector<Feature>& feats,
           std::optional<std::string> label = std::nullopt) {
    save_features(tmp.path() / (id + ".siftv1"), feats);
    IndexEntry e;
    e.id = id;
    e.clip = clip_of(id);
    e.label = std::move(label);
    e.feature_path = tmp.path() / (id + ".siftv1");
    index.entries.push_back(e);
  }

  void finalize() {
    std::sort(index.entries.begin(), index.entries.end(),
              [](const IndexEntry& a, const IndexEntry& b) { return a.id < b.id; });
    store = FeatureStore::load(index);
  }
};

}  // namespace

TEST_CASE("rank_matches excludes the query's own clip") {
  ToyGallery g;
  const auto feats = feature_block(11, 8);
  g.add("clipA_0", feats);
  g.add("clipA_1", feats);  // same clip: must never appear
  g.add("clipB_0", feats);  // other clip, identical features
  g.finalize();

  MatchConfig cfg;
  const RankedResult r = rank_matches("clipA_0", g.index, g.store, cfg);
  REQUIRE(r.ranked.size() == 1);
  REQUIRE(r.ranked[0].image == "clipB_0");
  REQUIRE(r.ranked[0].score == 9.0);  // |feat| + 1

  // only same-clip gallery -> empty ranking
  ToyGallery solo;
  solo.add("clipC_0", feats);
  solo.add("clipC_1", feats);
  solo.finalize();
  REQUIRE(rank_matches("clipC_0", solo.index, solo.store, cfg).ranked.empty());

  REQUIRE_THROWS_AS(rank_matches("missing", g.index, g.store, cfg), LookupError);
}

TEST_CASE("ranking equals independently computed pair scores") {
  ToyGallery g;
  const auto query_feats = feature_block(20, 10);
  g.add("q_0", query_feats);
  for (int i = 0; i < 6; ++i) {
    std::vector<Feature> gal = i == 3 ? query_feats : feature_block(30 + i, 6 + i);
    g.add("g" + std::to_string(i) + "_0", gal);
  }
  g.finalize();

  MatchConfig cfg;
  const RankedResult r = rank_matches("q_0", g.index, g.store, cfg);

  // oracle: score every candidate directly and sort the same way
  std::vector<RankedEntry> expect;
  for (const auto& e : g.index.entries) {
    if (e.id == "q_0") continue;
    const auto pr = match_pair(g.store.get("q_0"), g.store.get(e.id), cfg, "q_0", e.id);
    if (pr) expect.push_back({e.id, e.clip, pr->score, pr->n_matches, pr->mean_distance});
  }
  std::sort(expect.begin(), expect.end(), [](const RankedEntry& a, const RankedEntry& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.image < b.image;
  });

  REQUIRE(r.ranked.size() == expect.size());
  for (std::size_t i = 0; i < expect.size(); ++i) {
    REQUIRE(r.ranked[i].image == expect[i].image);
    REQUIRE(r.ranked[i].score == expect[i].score);
  }
  REQUIRE(r.ranked[0].image == "g3_0");  // the identical-feature entry wins

  // scores strictly non-increasing down the ranking
  for (std::size_t i = 1; i < r.ranked.size(); ++i) {
    REQUIRE(r.ranked[i].score <= r.ranked[i - 1].score);
  }
}

TEST_CASE("top_x takes prefixes") {
  RankedResult r;
  r.ranked = {{"a", "a", 9.0, 8, 0.0}, {"b", "b", 7.5, 7, 0.1}, {"c", "c", 5.0, 4, 0.4}};
  REQUIRE(top_x(r, 1) == std::vector<std::string>{"a"});
  REQUIRE(top_x(r, 3) == std::vector<std::string>{"a", "b", "c"});
  REQUIRE(top_x(r, 5).size() == 3);

  const auto two = top_x(r, 2);
  const auto three = top_x(r, 3);
  REQUIRE(std::equal(two.begin(), two.end(), three.begin()));

  REQUIRE_THROWS_AS(top_x(r, 0), ArgumentError);
}
