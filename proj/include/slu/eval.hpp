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

#include <string>
#include <vector>

#include "slu/nlu_engine.hpp"
#include "slu/semantic_frame.hpp"

namespace slu {

struct EvalExample {
  std::vector<std::string> tokens;
  SemanticFrame gold;
};

struct EvalMetrics {
  double intent_accuracy = 0;
  double slot_f1 = 0;  // exact-span micro F1
  double slot_precision = 0;
  double slot_recall = 0;
  double coverage_rate = 0;  // fraction answered by the deterministic path
  size_t examples = 0;

  std::string to_json() const;
  std::string human() const;
};

struct EvalParseIssue {
  size_t line = 0;
  std::string message;
};

// Test file: either `tokens TAB frame-json` (the corpus/sample format) or
// one frame-json object per line carrying a "text" field. Bad lines are
// reported and skipped.
std::vector<EvalExample> parse_eval_file(std::string_view text,
                                         std::vector<EvalParseIssue>* issues);

EvalMetrics evaluate(const NluEngine& engine, const std::vector<EvalExample>& examples);

// Frame-level slot comparison used by the metrics: exact (name, span, value).
bool slots_match_exact(const SemanticFrame& predicted, const SemanticFrame& gold);

}  // namespace slu
