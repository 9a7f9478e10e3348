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
#include <string>
#include <string_view>
#include <vector>

namespace slu {

// Bloom filter encoding one word cluster (gazetteer). k probe positions come
// from double hashing of two seeded 64-bit hashes. Inserted members are never
// reported absent; non-members hit with probability around the design FPR.
class BloomFilter {
 public:
  BloomFilter() = default;

  // Sizes the filter for `expected_items` at `target_fpr`:
  //   m = ceil(-n ln p / (ln 2)^2),  k = round((m/n) ln 2)
  BloomFilter(std::string name, size_t expected_items, double target_fpr,
              uint64_t seed = 0x5b10f11a9u);

  void insert(std::string_view key);
  bool contains(std::string_view key) const;

  const std::string& name() const { return name_; }
  uint64_t bit_count() const { return m_; }
  uint32_t hash_count() const { return k_; }
  uint64_t inserted() const { return count_; }

  // header (m, k, seeds, count, name) + bit array, little-endian
  std::string to_bytes() const;
  static BloomFilter from_bytes(std::string_view bytes);

  static uint64_t design_bits(size_t n, double p);
  static uint32_t design_hashes(uint64_t m, size_t n);

 private:
  std::string name_;
  uint64_t m_ = 0;
  uint32_t k_ = 0;
  uint64_t seed1_ = 0;
  uint64_t seed2_ = 0;
  uint64_t count_ = 0;
  std::vector<uint64_t> bits_;
};

// Builds a filter over a value list. Multi-token values are inserted whole
// plus one prefix key per proper token prefix, so the span matcher can
// extend matches greedily. Sizing counts the distinct keys actually stored.
BloomFilter build_bloom_filter(const std::string& cluster_name,
                               const std::vector<std::string>& values,
                               double target_fpr = 0.01);

// Key forms used by build_bloom_filter / the span matcher.
std::string bloom_whole_key(std::string_view phrase);
std::string bloom_prefix_key(std::string_view phrase);

}  // namespace slu
