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

#include "slu/eval.hpp"

#include <sstream>

#include <json.hpp>

#include "slu/builder.hpp"
#include "slu/text.hpp"

namespace slu {

using nlohmann::json;

std::string EvalMetrics::to_json() const {
  return json{{"intent_accuracy", intent_accuracy},
              {"slot_f1", slot_f1},
              {"slot_precision", slot_precision},
              {"slot_recall", slot_recall},
              {"coverage_rate", coverage_rate},
              {"examples", examples}}
      .dump();
}

std::string EvalMetrics::human() const {
  std::ostringstream out;
  out << "examples:          " << examples << "\n";
  out << "intent accuracy:   " << intent_accuracy << "\n";
  out << "slot F1 (exact):   " << slot_f1 << " (P=" << slot_precision
      << " R=" << slot_recall << ")\n";
  out << "deterministic coverage: " << coverage_rate << "\n";
  return out.str();
}

std::vector<EvalExample> parse_eval_file(std::string_view text,
                                         std::vector<EvalParseIssue>* issues) {
  std::vector<EvalExample> out;
  std::istringstream in{std::string(text)};
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      EvalExample ex;
      size_t tab = line.find('\t');
      if (tab != std::string::npos) {
        ex.tokens = tokenize(line.substr(0, tab));
        ex.gold = SemanticFrame::from_json(line.substr(tab + 1));
      } else {
        json j = json::parse(line);
        if (!j.contains("text")) throw std::runtime_error("missing \"text\"");
        ex.tokens = tokenize(j["text"].get<std::string>());
        ex.gold = SemanticFrame::from_json(line);
      }
      if (ex.tokens.empty()) throw std::runtime_error("empty utterance");
      if (ex.gold.intent.empty()) throw std::runtime_error("missing intent");
      out.push_back(std::move(ex));
    } catch (const std::exception& e) {
      if (issues) issues->push_back({line_no, e.what()});
    }
  }
  return out;
}

bool slots_match_exact(const SemanticFrame& predicted, const SemanticFrame& gold) {
  return predicted.slots == gold.slots;
}

EvalMetrics evaluate(const NluEngine& engine, const std::vector<EvalExample>& examples) {
  EvalMetrics m;
  m.examples = examples.size();
  if (examples.empty()) return m;

  size_t intent_hits = 0;
  size_t deterministic = 0;
  size_t tp = 0, fp = 0, fn = 0;
  for (const auto& ex : examples) {
    NLUResult result = engine.understand_tokens(ex.tokens);
    const SemanticFrame* frame = result.frame ? &*result.frame : nullptr;
    if (frame && frame->intent == ex.gold.intent) ++intent_hits;
    if (frame && frame->source == FrameSource::Deterministic) ++deterministic;

    for (const auto& [name, fill] : ex.gold.slots) {
      if (frame) {
        auto it = frame->slots.find(name);
        if (it != frame->slots.end() && it->second == fill) {
          ++tp;
          continue;
        }
      }
      ++fn;
    }
    if (frame) {
      for (const auto& [name, fill] : frame->slots) {
        auto it = ex.gold.slots.find(name);
        if (it == ex.gold.slots.end() || !(it->second == fill)) ++fp;
      }
    }
  }

  m.intent_accuracy = double(intent_hits) / double(examples.size());
  m.coverage_rate = double(deterministic) / double(examples.size());
  m.slot_precision = tp + fp == 0 ? 1.0 : double(tp) / double(tp + fp);
  m.slot_recall = tp + fn == 0 ? 1.0 : double(tp) / double(tp + fn);
  m.slot_f1 = (m.slot_precision + m.slot_recall) == 0
                  ? 0.0
                  : 2 * m.slot_precision * m.slot_recall /
                        (m.slot_precision + m.slot_recall);
  return m;
}

}  // namespace slu
