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

#include "slu/nlu_engine.hpp"

#include <algorithm>
#include <set>

#include <json.hpp>

#include "slu/feature_extraction.hpp"
#include "slu/text.hpp"

namespace slu {

using nlohmann::json;

std::string NLUResult::to_json() const {
  json j;
  if (frame) {
    j["intent"] = frame->intent;
    json slots = json::object();
    for (const auto& [name, fill] : frame->slots)
      slots[name] = json{{"value", fill.value}, {"span", {fill.begin, fill.end}}};
    j["slots"] = std::move(slots);
    j["confidence"] = frame->confidence;
    j["source"] = frame_source_name(frame->source);
  }
  j["out_of_domain"] = out_of_domain;
  json diag{{"path", diagnostics.path}};
  if (!diagnostics.intent_posteriors.empty()) {
    json post = json::object();
    for (const auto& [label, p] : diagnostics.intent_posteriors) post[label] = p;
    diag["intent_posteriors"] = std::move(post);
  }
  j["diagnostics"] = std::move(diag);
  return j.dump();
}

NluEngine::NluEngine(SkillModelBundle bundle) : bundle_(std::move(bundle)) {
  if (bundle_.intent_model.labels.empty())
    throw BundleError("bundle component missing: intent model");
  if (bundle_.slot_model.labels.size() == 0)
    throw BundleError("bundle component missing: slot model");
  if (bundle_.grammar.num_states() == 0)
    throw BundleError("bundle component missing: grammar");
  intent_model_ = dequantize_model(bundle_.intent_model);
  slot_model_ = dequantize_model(bundle_.slot_model);
}

NLUResult NluEngine::understand(const std::string& text) const {
  return understand_tokens(tokenize(text));
}

NLUResult NluEngine::understand_tokens(const std::vector<std::string>& tokens) const {
  NLUResult result;
  if (tokens.empty()) {
    result.out_of_domain = true;
    result.diagnostics.path = "out_of_domain";
    return result;
  }

  // deterministic path first: guaranteed coverage of the developer grammar
  if (auto frame = recognize_deterministic(bundle_.grammar, tokens)) {
    result.frame = std::move(*frame);
    result.diagnostics.path = "deterministic";
    return result;
  }

  // statistical cascade
  std::vector<std::string> bio;
  SemanticFrame slot_frame;
  bool tagged_first = bundle_.nlu.slots_first;
  if (tagged_first) {
    std::vector<FeatureVector> seq;
    for (size_t t = 0; t < tokens.size(); ++t)
      seq.push_back(hash_features(
          extract_tagger_features(tokens, t, bundle_.gazetteers), slot_model_.hash));
    bio = viterbi_decode(slot_model_, seq).first;
  }

  FeatureSet intent_features = extract_intent_features(tokens, bundle_.gazetteers);
  if (tagged_first) {
    // entity-first cascade feeds recognized slot names to the classifier
    std::set<std::string> seen;
    for (const auto& tag : bio)
      if (tag != "O") seen.insert(tag.substr(2));
    for (const auto& slot : seen) intent_features.push_back({"slot=" + slot, 1.0});
  }
  std::vector<double> posteriors =
      predict_intent(intent_model_, hash_features(intent_features, intent_model_.hash));

  size_t best = 0;
  for (size_t i = 1; i < posteriors.size(); ++i)
    if (posteriors[i] > posteriors[best]) best = i;
  for (size_t i = 0; i < posteriors.size(); ++i)
    result.diagnostics.intent_posteriors.push_back(
        {intent_model_.labels[i], posteriors[i]});

  if (posteriors[best] < bundle_.nlu.rejection_threshold) {
    result.out_of_domain = true;
    result.diagnostics.path = "out_of_domain";
    return result;
  }

  if (!tagged_first) {
    std::vector<FeatureVector> seq;
    for (size_t t = 0; t < tokens.size(); ++t)
      seq.push_back(hash_features(
          extract_tagger_features(tokens, t, bundle_.gazetteers), slot_model_.hash));
    bio = viterbi_decode(slot_model_, seq).first;
  }

  SemanticFrame frame = decode_frame(tokens, bio, intent_model_.labels[best]);
  // keep only slots the predicted intent declares
  if (const IntentDecl* decl = bundle_.model.schema.find_intent(frame.intent)) {
    for (auto it = frame.slots.begin(); it != frame.slots.end();) {
      if (!decl->find_slot(it->first))
        it = frame.slots.erase(it);
      else
        ++it;
    }
  }
  frame.confidence = posteriors[best];
  frame.source = FrameSource::Statistical;
  result.frame = std::move(frame);
  result.diagnostics.path = "statistical";
  return result;
}

}  // namespace slu
