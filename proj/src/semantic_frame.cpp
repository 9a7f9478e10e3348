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

#include "slu/semantic_frame.hpp"

#include <json.hpp>

namespace slu {

using nlohmann::json;

const char* frame_source_name(FrameSource s) {
  return s == FrameSource::Deterministic ? "deterministic" : "statistical";
}

std::string SemanticFrame::to_json() const {
  json j;
  j["intent"] = intent;
  json slots_j = json::object();
  for (const auto& [name, fill] : slots) {
    slots_j[name] = json{{"value", fill.value}, {"span", {fill.begin, fill.end}}};
  }
  j["slots"] = std::move(slots_j);
  j["confidence"] = confidence;
  j["source"] = frame_source_name(source);
  return j.dump();
}

SemanticFrame SemanticFrame::from_json(const std::string& text) {
  json j = json::parse(text);
  SemanticFrame f;
  f.intent = j.value("intent", std::string());
  if (j.contains("slots")) {
    for (const auto& [name, sj] : j["slots"].items()) {
      SlotFill fill;
      if (sj.is_string()) {
        fill.value = sj.get<std::string>();
      } else {
        fill.value = sj.value("value", std::string());
        if (sj.contains("span") && sj["span"].is_array() && sj["span"].size() == 2) {
          fill.begin = sj["span"][0].get<uint32_t>();
          fill.end = sj["span"][1].get<uint32_t>();
        }
      }
      f.slots[name] = std::move(fill);
    }
  }
  f.confidence = j.value("confidence", 0.0);
  f.source = j.value("source", std::string("deterministic")) == "statistical"
                 ? FrameSource::Statistical
                 : FrameSource::Deterministic;
  return f;
}

}  // namespace slu
