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
#include <vector>

namespace slu {

struct SlotFill {
  std::string value;    // normalized surface text
  uint32_t begin = 0;   // token span [begin, end)
  uint32_t end = 0;

  friend bool operator==(const SlotFill&, const SlotFill&) = default;
};

enum class FrameSource { Deterministic, Statistical };

// Recognition result: the intent plus slot fills with token spans.
struct SemanticFrame {
  std::string intent;
  std::map<std::string, SlotFill> slots;
  double confidence = 0.0;
  FrameSource source = FrameSource::Deterministic;

  std::string to_json() const;
  static SemanticFrame from_json(const std::string& text);

  // Span layout + intent identity; confidence/source compared separately.
  bool same_parse(const SemanticFrame& other) const {
    return intent == other.intent && slots == other.slots;
  }
};

const char* frame_source_name(FrameSource s);

}  // namespace slu
