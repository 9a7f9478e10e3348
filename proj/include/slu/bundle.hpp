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
#include <optional>
#include <string>
#include <vector>

#include "slu/bloom.hpp"
#include "slu/crf.hpp"
#include "slu/grammar.hpp"
#include "slu/interaction_model.hpp"
#include "slu/maxent.hpp"

namespace slu {

class BundleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Runtime knobs baked into a bundle at build time.
struct NluConfig {
  double rejection_threshold = 0.35;  // intent posterior below this -> out of domain
  bool slots_first = false;           // run the tagger before the classifier

  std::string to_json() const;
  static NluConfig from_json(std::string_view text);
};

// Versioned deployable: everything the runtime needs to answer queries for
// one skill, loadable in one read.
struct SkillModelBundle {
  std::string skill_id;
  uint64_t version = 0;

  InteractionModel model;
  WeightedGrammar grammar;
  std::vector<BloomFilter> gazetteers;
  QuantizedMaxEnt intent_model;
  QuantizedCrf slot_model;
  NluConfig nlu;

  // build metadata; excluded from the content digest
  uint64_t created_unix_ms = 0;
  std::string config_digest;

  // Identity of the model content (grammar, models, filters, config);
  // stable across rebuilds of the same inputs with the same seed.
  std::string content_digest() const;
};

std::string bundle_to_bytes(const SkillModelBundle& bundle);

// Verifies every section digest; truncation or corruption raises
// BundleError rather than returning garbage.
SkillModelBundle bundle_from_bytes(std::string_view bytes);

// Cheap header-only peek (skill id, version, digests) without decoding
// the model sections.
struct BundleInfo {
  std::string skill_id;
  uint64_t version = 0;
  uint64_t created_unix_ms = 0;
  std::string content_digest;
  std::string invocation_name;
};
BundleInfo bundle_info(std::string_view bytes);

}  // namespace slu
