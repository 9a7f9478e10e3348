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

#include "slu/bundle.hpp"
#include "slu/pipeline.hpp"

namespace slu {

// Knobs of the skill build recipe. Every field flows through recipe
// parameters, so builds are reproducible from the serialized DAG alone.
struct BuildConfig {
  std::string priors = "uniform";  // "uniform" | "empirical"
  uint64_t sample_count = 4000;
  uint64_t seed = 42;
  double target_fpr = 0.01;
  uint32_t epochs = 12;
  double learning_rate = 0.25;
  double l1 = 1e-7;
  double l2 = 1e-6;
  double knowledge_dropout = 0.1;
  uint32_t hash_bits = 18;
  uint64_t hash_seed = 0x8badf00d;
  double rejection_threshold = 0.35;
  bool slots_first = false;
  uint64_t version = 0;        // 0: assigned by the store
  uint64_t build_time_ms = 0;  // 0: wall clock at assemble time

  std::map<std::string, std::string> to_params() const;
  static BuildConfig from_params(const std::map<std::string, std::string>& params);
  // Loads overrides from a flat JSON object {"epochs": 12, ...}.
  void apply_json(std::string_view json_text);

  std::string canonical_json() const;
  std::string digest() const;  // sha256 of canonical_json

  TrainConfig train_config() const;
};

// Corpus artifact format: one line per sampled utterance,
// `<space-joined tokens> TAB <frame json>`.
std::string corpus_line(const std::vector<std::string>& tokens, const SemanticFrame& frame);
std::pair<std::vector<std::string>, SemanticFrame> parse_corpus_line(std::string_view line);

// Registers the skill-build activities into `registry` (no-op when already
// present). builtin_activities() arrives pre-populated.
void register_build_activities(ActivityRegistry& registry);

// Recipes shipped with the toolkit, built against builtin_activities().
const std::vector<RecipeDAG>& builtin_recipes();
const RecipeDAG* find_recipe(std::string_view name);

struct BuildOutput {
  std::string bundle_bytes;
  RunReport report;
};

// Runs the build_skill_bundle recipe over an in-memory artifact space.
// The model must already validate cleanly.
BuildOutput build_skill_bundle(const InteractionModel& model, const std::string& skill_id,
                               const BuildConfig& config,
                               const ExecutorOptions& executor);

}  // namespace slu
