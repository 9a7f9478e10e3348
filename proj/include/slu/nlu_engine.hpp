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

#include <optional>
#include <string>
#include <vector>

#include "slu/bundle.hpp"
#include "slu/semantic_frame.hpp"

namespace slu {

struct NluDiagnostics {
  std::string path;  // "deterministic" | "statistical" | "out_of_domain"
  std::vector<std::pair<std::string, double>> intent_posteriors;  // statistical only
};

struct NLUResult {
  std::optional<SemanticFrame> frame;
  bool out_of_domain = false;
  NluDiagnostics diagnostics;

  std::string to_json() const;
};

// Hybrid recognizer over one loaded bundle: the deterministic grammar path
// answers everything it accepts; the statistical cascade covers the rest,
// rejecting below the configured posterior threshold.
class NluEngine {
 public:
  explicit NluEngine(SkillModelBundle bundle);

  NLUResult understand(const std::string& text) const;
  NLUResult understand_tokens(const std::vector<std::string>& tokens) const;

  const SkillModelBundle& bundle() const { return bundle_; }

 private:
  SkillModelBundle bundle_;
  MaxEntModel intent_model_;  // dequantized once at load
  CrfModel slot_model_;
};

}  // namespace slu
