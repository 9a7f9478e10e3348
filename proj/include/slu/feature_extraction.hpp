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

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "slu/bloom.hpp"
#include "slu/rng.hpp"

namespace slu {

// Named sparse features prior to hashing. Values are counts/indicators.
struct NamedFeature {
  std::string name;
  double value = 1.0;
};
using FeatureSet = std::vector<NamedFeature>;

// Prefix marking knowledge-base (gazetteer) features; knowledge dropout
// applies to these only.
inline constexpr std::string_view kClusterFeaturePrefix = "in-cluster:";

bool is_knowledge_feature(std::string_view name);

// Whole-phrase gazetteer membership (the filter's public alphabet).
bool gazetteer_contains(const BloomFilter& filter, std::string_view phrase);

// Greedy longest-match spans of gazetteer members over token n-grams
// (n <= 4). Returns [begin, end) pairs, non-overlapping, left to right.
std::vector<std::pair<uint32_t, uint32_t>> match_gazetteer_spans(
    const BloomFilter& filter, const std::vector<std::string>& tokens,
    uint32_t max_span = 4);

// Per-position tagging features: word identities in a +-2 window, bigrams,
// prefixes/suffixes (length <= 3), word shape, and one `in-cluster:<name>`
// indicator per gazetteer whose matched span covers the position.
FeatureSet extract_tagger_features(const std::vector<std::string>& tokens,
                                   size_t position,
                                   const std::vector<BloomFilter>& gazetteers);

// Utterance-level classification features: unigrams, bigrams, token count
// bucket, and gazetteer span indicators.
FeatureSet extract_intent_features(const std::vector<std::string>& tokens,
                                   const std::vector<BloomFilter>& gazetteers);

// Training-time regularization: each knowledge feature is dropped
// independently with probability `rate`. Lexical features pass through.
// Inference never calls this.
FeatureSet apply_knowledge_dropout(const FeatureSet& features, double rate, Rng& rng);

// Hashed sparse vector; ids < 2^bits, duplicate ids accumulated.
struct FeatureVector {
  std::vector<std::pair<uint32_t, double>> entries;  // sorted by id
  uint32_t dimension = 0;
};

struct HashConfig {
  uint32_t bits = 18;
  uint64_t seed = 0x8badf00d;

  uint32_t dimension() const { return uint32_t(1) << bits; }
  friend bool operator==(const HashConfig&, const HashConfig&) = default;
};

// Feature hashing: id = h(name) mod 2^bits; a second hash bit flips the
// sign of the contribution so colliding features cancel in expectation.
FeatureVector hash_features(const FeatureSet& features, const HashConfig& config);

uint32_t hash_feature_id(std::string_view name, const HashConfig& config);
double hash_feature_sign(std::string_view name, const HashConfig& config);

// Exact (collision-free) indexer used as the reference point when measuring
// the cost of hashing. Grows while frozen() is false; unknown names map to
// no feature afterwards.
class DictIndexer {
 public:
  FeatureVector index(const FeatureSet& features);
  void freeze() { frozen_ = true; }
  bool frozen() const { return frozen_; }
  uint32_t dimension() const;

 private:
  std::unordered_map<std::string, uint32_t> ids_;
  bool frozen_ = false;
};

}  // namespace slu
