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

#include "slu/feature_extraction.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>

#include "slu/text.hpp"

namespace slu {

bool is_knowledge_feature(std::string_view name) {
  return name.starts_with(kClusterFeaturePrefix);
}

bool gazetteer_contains(const BloomFilter& filter, std::string_view phrase) {
  return filter.contains(bloom_whole_key(phrase));
}

std::vector<std::pair<uint32_t, uint32_t>> match_gazetteer_spans(
    const BloomFilter& filter, const std::vector<std::string>& tokens,
    uint32_t max_span) {
  std::vector<std::pair<uint32_t, uint32_t>> spans;
  uint32_t n = uint32_t(tokens.size());
  uint32_t i = 0;
  while (i < n) {
    uint32_t best_len = 0;
    std::string phrase;
    for (uint32_t len = 1; len <= max_span && i + len <= n; ++len) {
      phrase += (len > 1 ? " " : "") + tokens[i + len - 1];
      if (filter.contains(bloom_whole_key(phrase))) best_len = len;
      // no member and no member extension starts with this prefix: stop early
      if (!filter.contains(bloom_prefix_key(phrase)) && best_len < len) break;
    }
    if (best_len > 0) {
      spans.push_back({i, i + best_len});
      i += best_len;  // greedy longest match, no overlaps
    } else {
      ++i;
    }
  }
  return spans;
}

namespace {

std::string word_shape(std::string_view token) {
  std::string shape;
  for (char c : token) {
    char cls;
    unsigned char u = static_cast<unsigned char>(c);
    if (u >= 'a' && u <= 'z') cls = 'x';
    else if (u >= 'A' && u <= 'Z') cls = 'X';
    else if (u >= '0' && u <= '9') cls = 'd';
    else cls = 'o';
    if (shape.empty() || shape.back() != cls) shape.push_back(cls);
  }
  return shape;
}

const std::string kBos = "<s>";
const std::string kEos = "</s>";

void add_cluster_features(FeatureSet& out, const std::vector<std::string>& tokens,
                          const std::vector<BloomFilter>& gazetteers,
                          size_t position, bool whole_utterance) {
  for (const auto& gaz : gazetteers) {
    auto spans = match_gazetteer_spans(gaz, tokens);
    if (whole_utterance) {
      if (!spans.empty())
        out.push_back({std::string(kClusterFeaturePrefix) + gaz.name(), double(spans.size())});
      continue;
    }
    for (const auto& [begin, end] : spans) {
      if (begin <= position && position < end) {
        out.push_back({std::string(kClusterFeaturePrefix) + gaz.name(), 1.0});
        break;
      }
    }
  }
}

}  // namespace

FeatureSet extract_tagger_features(const std::vector<std::string>& tokens,
                                   size_t position,
                                   const std::vector<BloomFilter>& gazetteers) {
  if (position >= tokens.size()) throw std::out_of_range("tagger position out of range");
  FeatureSet out;
  auto word_at = [&](int64_t i) -> const std::string& {
    if (i < 0) return kBos;
    if (i >= int64_t(tokens.size())) return kEos;
    return tokens[size_t(i)];
  };
  int64_t p = int64_t(position);
  const std::string& w0 = tokens[position];

  out.push_back({"w0=" + w0, 1.0});
  out.push_back({"w-1=" + word_at(p - 1), 1.0});
  out.push_back({"w+1=" + word_at(p + 1), 1.0});
  out.push_back({"w-2=" + word_at(p - 2), 1.0});
  out.push_back({"w+2=" + word_at(p + 2), 1.0});
  out.push_back({"w-1|w0=" + word_at(p - 1) + "|" + w0, 1.0});
  out.push_back({"w0|w+1=" + w0 + "|" + word_at(p + 1), 1.0});
  for (size_t len = 1; len <= 3 && len <= w0.size(); ++len) {
    out.push_back({"pre=" + w0.substr(0, len), 1.0});
    out.push_back({"suf=" + w0.substr(w0.size() - len), 1.0});
  }
  out.push_back({"shape=" + word_shape(w0), 1.0});

  add_cluster_features(out, tokens, gazetteers, position, /*whole_utterance=*/false);
  return out;
}

FeatureSet extract_intent_features(const std::vector<std::string>& tokens,
                                   const std::vector<BloomFilter>& gazetteers) {
  FeatureSet out;
  out.push_back({"bias", 1.0});
  std::map<std::string, double> counts;
  for (const auto& t : tokens) counts["u=" + t] += 1.0;
  for (size_t i = 0; i + 1 < tokens.size(); ++i)
    counts["b=" + tokens[i] + "|" + tokens[i + 1]] += 1.0;
  if (!tokens.empty()) {
    counts["first=" + tokens.front()] = 1.0;
    counts["len=" + std::to_string(std::min<size_t>(tokens.size(), 8))] = 1.0;
  }
  for (auto& [name, value] : counts) out.push_back({name, value});

  add_cluster_features(out, tokens, gazetteers, 0, /*whole_utterance=*/true);
  return out;
}

FeatureSet apply_knowledge_dropout(const FeatureSet& features, double rate, Rng& rng) {
  if (rate < 0.0 || rate >= 1.0)
    throw std::invalid_argument("knowledge dropout rate must be in [0, 1)");
  if (rate == 0.0) return features;
  FeatureSet out;
  out.reserve(features.size());
  for (const auto& f : features) {
    if (is_knowledge_feature(f.name) && rng.uniform() < rate) continue;
    out.push_back(f);
  }
  return out;
}

uint32_t hash_feature_id(std::string_view name, const HashConfig& config) {
  uint64_t h = hash_string(name, config.seed);
  return uint32_t(h & (config.dimension() - 1));
}

double hash_feature_sign(std::string_view name, const HashConfig& config) {
  uint64_t h = hash_string(name, splitmix64(config.seed ^ 0x516e8b17ULL));
  return (h & 1) ? 1.0 : -1.0;
}

FeatureVector hash_features(const FeatureSet& features, const HashConfig& config) {
  if (config.bits < 1 || config.bits > 30)
    throw std::invalid_argument("hash bits must be in [1, 30]");
  std::map<uint32_t, double> acc;
  for (const auto& f : features) {
    uint32_t id = hash_feature_id(f.name, config);
    acc[id] += hash_feature_sign(f.name, config) * f.value;
  }
  FeatureVector out;
  out.dimension = config.dimension();
  out.entries.assign(acc.begin(), acc.end());
  return out;
}

FeatureVector DictIndexer::index(const FeatureSet& features) {
  std::map<uint32_t, double> acc;
  for (const auto& f : features) {
    auto it = ids_.find(f.name);
    if (it == ids_.end()) {
      if (frozen_) continue;
      it = ids_.emplace(f.name, uint32_t(ids_.size())).first;
    }
    acc[it->second] += f.value;
  }
  FeatureVector out;
  out.dimension = dimension();
  out.entries.assign(acc.begin(), acc.end());
  return out;
}

uint32_t DictIndexer::dimension() const {
  return std::max<uint32_t>(1, uint32_t(ids_.size()));
}

}  // namespace slu
