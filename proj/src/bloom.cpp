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

#include "slu/bloom.hpp"

#include <cmath>
#include <set>
#include <stdexcept>

#include "slu/hashing.hpp"
#include "slu/io.hpp"
#include "slu/text.hpp"

namespace slu {

uint64_t BloomFilter::design_bits(size_t n, double p) {
  double ln2 = std::log(2.0);
  return uint64_t(std::ceil(-double(n) * std::log(p) / (ln2 * ln2)));
}

uint32_t BloomFilter::design_hashes(uint64_t m, size_t n) {
  uint32_t k = uint32_t(std::lround(double(m) / double(n) * std::log(2.0)));
  return k == 0 ? 1 : k;
}

BloomFilter::BloomFilter(std::string name, size_t expected_items, double target_fpr,
                         uint64_t seed)
    : name_(std::move(name)) {
  if (expected_items == 0) throw std::invalid_argument("bloom filter needs >= 1 item");
  if (!(target_fpr > 0.0 && target_fpr < 1.0))
    throw std::invalid_argument("target FPR must be in (0, 1)");
  m_ = design_bits(expected_items, target_fpr);
  k_ = design_hashes(m_, expected_items);
  seed1_ = splitmix64(seed);
  seed2_ = splitmix64(seed1_ ^ 0x9e3779b97f4a7c15ULL);
  bits_.assign((m_ + 63) / 64, 0);
}

void BloomFilter::insert(std::string_view key) {
  uint64_t h1 = hash_string(key, seed1_);
  uint64_t h2 = hash_string(key, seed2_) | 1;  // odd, cycles all positions
  for (uint32_t i = 0; i < k_; ++i) {
    uint64_t pos = (h1 + i * h2) % m_;
    bits_[pos >> 6] |= (1ULL << (pos & 63));
  }
  ++count_;
}

bool BloomFilter::contains(std::string_view key) const {
  if (m_ == 0) return false;
  uint64_t h1 = hash_string(key, seed1_);
  uint64_t h2 = hash_string(key, seed2_) | 1;
  for (uint32_t i = 0; i < k_; ++i) {
    uint64_t pos = (h1 + i * h2) % m_;
    if (!(bits_[pos >> 6] & (1ULL << (pos & 63)))) return false;
  }
  return true;
}

std::string BloomFilter::to_bytes() const {
  BinaryWriter w;
  w.u64(m_);
  w.u32(k_);
  w.u64(seed1_);
  w.u64(seed2_);
  w.u64(count_);
  w.str(name_);
  for (uint64_t word : bits_) w.u64(word);
  return w.take();
}

BloomFilter BloomFilter::from_bytes(std::string_view bytes) {
  BinaryReader r(bytes);
  BloomFilter f;
  f.m_ = r.u64();
  f.k_ = r.u32();
  f.seed1_ = r.u64();
  f.seed2_ = r.u64();
  f.count_ = r.u64();
  f.name_ = r.str();
  size_t words = size_t((f.m_ + 63) / 64);
  f.bits_.reserve(words);
  for (size_t i = 0; i < words; ++i) f.bits_.push_back(r.u64());
  return f;
}

std::string bloom_whole_key(std::string_view phrase) {
  return "W:" + std::string(phrase);
}

std::string bloom_prefix_key(std::string_view phrase) {
  return "P:" + std::string(phrase);
}

BloomFilter build_bloom_filter(const std::string& cluster_name,
                               const std::vector<std::string>& values,
                               double target_fpr) {
  if (values.empty()) throw std::invalid_argument("bloom filter: empty value list");

  std::set<std::string> keys;
  for (const auto& value : values) {
    std::vector<std::string> tokens = tokenize(value);
    if (tokens.empty()) continue;
    std::string prefix;
    for (size_t i = 0; i + 1 < tokens.size(); ++i) {
      prefix += (i ? " " : "") + tokens[i];
      keys.insert(bloom_prefix_key(prefix));
    }
    keys.insert(bloom_whole_key(join(tokens)));
  }
  if (keys.empty()) throw std::invalid_argument("bloom filter: empty value list");

  BloomFilter filter(cluster_name, keys.size(), target_fpr);
  for (const auto& key : keys) filter.insert(key);
  return filter;
}

}  // namespace slu
