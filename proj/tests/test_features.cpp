// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "slu/bloom.hpp"
#include "slu/feature_extraction.hpp"
#include "slu/rng.hpp"
#include "slu/text.hpp"

using namespace slu;

namespace {

bool has_feature(const FeatureSet& fs, const std::string& name) {
  return std::any_of(fs.begin(), fs.end(),
                     [&](const NamedFeature& f) { return f.name == name; });
}

}  // namespace

TEST_CASE("bloom sizing matches the closed-form design") {
  // m = ceil(-n ln p / (ln 2)^2), k = round((m/n) ln 2)
  CHECK(BloomFilter::design_bits(1000, 0.01) == 9586);
  CHECK(BloomFilter::design_hashes(9586, 1000) == 7);

  BloomFilter f("t", 1000, 0.01);
  CHECK(f.bit_count() == 9586);
  CHECK(f.hash_count() == 7);
}

TEST_CASE("bloom filters never lose an inserted member") {
  std::vector<std::string> values;
  for (int i = 0; i < 2000; ++i) values.push_back("member" + std::to_string(i));
  BloomFilter f = build_bloom_filter("CLUSTER", values, 0.01);
  for (const auto& v : values) CHECK(gazetteer_contains(f, v));
  CHECK(f.name() == "CLUSTER");
}

TEST_CASE("measured FPR stays within 2x the design target") {
  std::vector<std::string> values;
  for (int i = 0; i < 1000; ++i) values.push_back("inside" + std::to_string(i));
  BloomFilter f = build_bloom_filter("CLUSTER", values, 0.01);

  size_t hits = 0;
  const size_t probes = 100000;
  for (size_t i = 0; i < probes; ++i) {
    if (gazetteer_contains(f, "outside" + std::to_string(i))) ++hits;
  }
  double fpr = double(hits) / double(probes);
  CHECK(fpr <= 2 * 0.01);
}

TEST_CASE("multi-token values match as whole spans with prefix keys") {
  BloomFilter f = build_bloom_filter("CITY", {"new york city", "boston"}, 0.01);
  CHECK(gazetteer_contains(f, "new york city"));
  CHECK(gazetteer_contains(f, "boston"));
  CHECK_FALSE(gazetteer_contains(f, "new york"));  // proper prefix, not a member

  auto spans = match_gazetteer_spans(
      f, {"fly", "to", "new", "york", "city", "then", "boston"});
  REQUIRE(spans.size() == 2);
  CHECK(spans[0] == std::pair<uint32_t, uint32_t>{2, 5});
  CHECK(spans[1] == std::pair<uint32_t, uint32_t>{6, 7});
}

TEST_CASE("bloom serialization round-trips") {
  BloomFilter f = build_bloom_filter("X", {"alpha", "beta", "gamma"}, 0.02);
  BloomFilter g = BloomFilter::from_bytes(f.to_bytes());
  CHECK(g.name() == "X");
  CHECK(g.bit_count() == f.bit_count());
  CHECK(g.hash_count() == f.hash_count());
  CHECK(g.inserted() == f.inserted());
  CHECK(gazetteer_contains(g, "alpha"));
  CHECK(gazetteer_contains(g, "beta"));
  CHECK(g.to_bytes() == f.to_bytes());
}

TEST_CASE("bloom guards") {
  CHECK_THROWS(build_bloom_filter("X", {}, 0.01));
  CHECK_THROWS(BloomFilter("X", 10, 0.0));
  CHECK_THROWS(BloomFilter("X", 10, 1.0));
  CHECK_THROWS(BloomFilter("X", 0, 0.01));
}

TEST_CASE("tagger features cover window, affixes, shape and clusters") {
  BloomFilter zodiac = build_bloom_filter("ZODIAC", {"taurus", "leo"}, 0.01);
  std::vector<std::string> tokens = tokenize("what is the horoscope for taurus");

  FeatureSet at_slot = extract_tagger_features(tokens, 5, {zodiac});
  CHECK(has_feature(at_slot, "w0=taurus"));
  CHECK(has_feature(at_slot, "w-1=for"));
  CHECK(has_feature(at_slot, "w+1=</s>"));
  CHECK(has_feature(at_slot, "w-2=horoscope"));
  CHECK(has_feature(at_slot, "w-1|w0=for|taurus"));
  CHECK(has_feature(at_slot, "pre=ta"));
  CHECK(has_feature(at_slot, "suf=rus"));
  CHECK(has_feature(at_slot, "shape=x"));
  CHECK(has_feature(at_slot, "in-cluster:ZODIAC"));

  FeatureSet off_slot = extract_tagger_features(tokens, 0, {zodiac});
  CHECK(has_feature(off_slot, "w-1=<s>"));       // begin-of-sentence marker
  CHECK_FALSE(has_feature(off_slot, "in-cluster:ZODIAC"));

  FeatureSet no_gaz = extract_tagger_features(tokens, 5, {});
  for (const auto& f : no_gaz) CHECK_FALSE(is_knowledge_feature(f.name));

  CHECK_THROWS(extract_tagger_features(tokens, tokens.size(), {}));
}

TEST_CASE("knowledge dropout removes only cluster features") {
  FeatureSet fs{{"w0=taurus", 1.0}, {"in-cluster:ZODIAC", 1.0}, {"suf=rus", 1.0}};
  Rng rng(1);

  SUBCASE("rate 0 is the identity") {
    FeatureSet kept = apply_knowledge_dropout(fs, 0.0, rng);
    CHECK(kept.size() == fs.size());
  }

  SUBCASE("no knowledge features means identity at any rate") {
    FeatureSet lexical{{"w0=a", 1.0}, {"w-1=b", 1.0}};
    FeatureSet kept = apply_knowledge_dropout(lexical, 0.9, rng);
    CHECK(kept.size() == lexical.size());
  }

  SUBCASE("retention rate concentrates around 1 - rate") {
    const int trials = 10000;
    int kept_count = 0;
    for (int i = 0; i < trials; ++i) {
      FeatureSet kept = apply_knowledge_dropout(fs, 0.5, rng);
      if (has_feature(kept, "in-cluster:ZODIAC")) ++kept_count;
      CHECK(has_feature(kept, "w0=taurus"));  // lexical always survives
    }
    double retained = double(kept_count) / trials;
    CHECK(retained == doctest::Approx(0.5).epsilon(0.04));
  }

  SUBCASE("rate outside [0,1) rejected") {
    CHECK_THROWS(apply_knowledge_dropout(fs, 1.0, rng));
    CHECK_THROWS(apply_knowledge_dropout(fs, -0.1, rng));
  }
}

TEST_CASE("feature hashing is deterministic and accumulates collisions") {
  HashConfig config{4, 99};  // 16 buckets force collisions
  FeatureSet fs{{"alpha", 1.0}, {"beta", 2.0}, {"gamma", 1.0}, {"delta", 1.0},
                {"epsilon", 1.0}, {"zeta", 1.0}, {"eta", 1.0}, {"theta", 1.0},
                {"iota", 1.0}, {"kappa", 1.0}, {"lambda", 1.0}, {"mu", 1.0},
                {"nu", 1.0}, {"xi", 1.0}, {"omicron", 1.0}, {"pi", 1.0},
                {"rho", 1.0}};

  FeatureVector a = hash_features(fs, config);
  FeatureVector b = hash_features(fs, config);
  REQUIRE(a.entries.size() == b.entries.size());
  for (size_t i = 0; i < a.entries.size(); ++i) CHECK(a.entries[i] == b.entries[i]);
  CHECK(a.dimension == 16);
  for (const auto& [id, value] : a.entries) CHECK(id < 16);
  // 17 names into 16 buckets must collide
  CHECK(a.entries.size() < fs.size());

  // same name, same seed, same id across calls
  CHECK(hash_feature_id("alpha", config) == hash_feature_id("alpha", config));
  HashConfig other{4, 100};
  bool any_moved = false;
  for (const auto& f : fs)
    if (hash_feature_id(f.name, config) != hash_feature_id(f.name, other)) any_moved = true;
  CHECK(any_moved);
}

TEST_CASE("signed hashing cancels collisions in expectation") {
  // two crafted names in one bucket accumulate; with opposite signs the sum
  // is the signed combination, never a silent drop
  HashConfig config{1, 5};  // 2 buckets
  FeatureSet fs{{"aa", 1.0}, {"bb", 1.0}, {"cc", 1.0}, {"dd", 1.0}};
  FeatureVector v = hash_features(fs, config);
  double total_mag = 0;
  for (const auto& [id, value] : v.entries) total_mag += std::abs(value);
  CHECK(total_mag <= 4.0);  // signs may cancel but never amplify
}

TEST_CASE("hashed collision rate tracks the birthday estimate at 2^18") {
  HashConfig config{18, 7};
  const size_t n = 100000;
  std::set<uint32_t> ids;
  size_t collisions = 0;
  for (size_t i = 0; i < n; ++i) {
    uint32_t id = hash_feature_id("feature-name-" + std::to_string(i), config);
    if (!ids.insert(id).second) ++collisions;
  }
  double d = double(config.dimension());
  // expected distinct = d(1 - (1 - 1/d)^n)
  double expected_collisions = double(n) - d * (1.0 - std::pow(1.0 - 1.0 / d, double(n)));
  CHECK(double(collisions) <= 2.0 * expected_collisions);
  CHECK(double(collisions) >= expected_collisions / 2.0);
}

TEST_CASE("hash bits validated") {
  FeatureSet fs{{"a", 1.0}};
  CHECK_THROWS(hash_features(fs, HashConfig{0, 1}));
  CHECK_THROWS(hash_features(fs, HashConfig{31, 1}));
}

TEST_CASE("intent features aggregate the utterance") {
  BloomFilter zodiac = build_bloom_filter("ZODIAC", {"taurus"}, 0.01);
  auto tokens = tokenize("what is the horoscope for taurus");
  FeatureSet fs = extract_intent_features(tokens, {zodiac});
  CHECK(has_feature(fs, "bias"));
  CHECK(has_feature(fs, "u=horoscope"));
  CHECK(has_feature(fs, "b=for|taurus"));
  CHECK(has_feature(fs, "first=what"));
  CHECK(has_feature(fs, "in-cluster:ZODIAC"));
  CHECK(extract_intent_features({}, {}).size() == 1);  // just the bias
}

TEST_CASE("dict indexer is exact and freezes") {
  DictIndexer indexer;
  FeatureVector a = indexer.index({{"x", 1.0}, {"y", 1.0}});
  CHECK(a.entries.size() == 2);
  FeatureVector b = indexer.index({{"y", 2.0}, {"z", 1.0}});
  CHECK(indexer.dimension() == 3);
  indexer.freeze();
  FeatureVector c = indexer.index({{"unknown", 1.0}, {"x", 1.0}});
  CHECK(c.entries.size() == 1);  // unknown dropped after freeze
  (void)b;
}
