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

#include "slu/dialogue.hpp"

#include <algorithm>
#include <set>

#include <json.hpp>

#include "slu/grammar.hpp"
#include "slu/text.hpp"

namespace slu {

using nlohmann::json;

std::string DialogueDirective::to_json() const {
  json j;
  switch (kind) {
    case Kind::ElicitSlot:
      j["directive"] = "ElicitSlot";
      j["slot"] = slot;
      j["prompt"] = prompt;
      break;
    case Kind::ConfirmIntent:
      j["directive"] = "ConfirmIntent";
      j["prompt"] = prompt;
      break;
    case Kind::Fulfill:
      j["directive"] = "Fulfill";
      j["frame"] = json::parse(frame.to_json());
      break;
  }
  return j.dump();
}

namespace {

const std::set<std::string> kAffirmative = {"yes", "yeah", "yep", "sure", "correct",
                                            "right", "ok", "okay"};

std::string slot_prompt(const SlotDecl& slot) {
  if (!slot.prompt.empty()) return slot.prompt;
  return "What " + slot.name + "?";
}

// `{Slot}` placeholders in developer prompts fill from the pending frame.
std::string fill_placeholders(std::string prompt, const SemanticFrame& frame) {
  for (const auto& [name, fill] : frame.slots) {
    std::string marker = "{" + name + "}";
    size_t pos;
    while ((pos = prompt.find(marker)) != std::string::npos)
      prompt.replace(pos, marker.size(), fill.value);
  }
  return prompt;
}

std::string escalation_prompt(const InteractionModel& model, const BuiltinCatalog& builtins,
                              const IntentDecl& intent, const std::string& slot_name) {
  const SlotDecl* slot = intent.find_slot(slot_name);
  std::string prompt = slot ? slot_prompt(*slot) : ("What " + slot_name + "?");
  if (slot) {
    if (const CustomSlotType* type = resolve_slot_type(model, builtins, slot->type)) {
      prompt += " For example: ";
      for (size_t i = 0; i < type->values.size() && i < 3; ++i)
        prompt += (i ? ", " : "") + type->values[i];
      prompt += ".";
    }
  }
  return prompt;
}

DialogueDirective elicit(const IntentDecl& intent, const std::string& slot_name) {
  DialogueDirective d;
  d.kind = DialogueDirective::Kind::ElicitSlot;
  d.slot = slot_name;
  const SlotDecl* slot = intent.find_slot(slot_name);
  d.prompt = slot ? slot_prompt(*slot) : ("What " + slot_name + "?");
  return d;
}

DialogueDirective confirm(const IntentDecl& intent, const SemanticFrame& frame) {
  DialogueDirective d;
  d.kind = DialogueDirective::Kind::ConfirmIntent;
  d.prompt = intent.confirmation_prompt.empty()
                 ? "Shall I go ahead with " + intent.name + "?"
                 : fill_placeholders(intent.confirmation_prompt, frame);
  return d;
}

DialogueDirective fulfill(DialogueState& state) {
  state.phase = DialoguePhase::Fulfilled;
  DialogueDirective d;
  d.kind = DialogueDirective::Kind::Fulfill;
  d.frame = state.pending;
  return d;
}

DialogueDirective escalate(DialogueState& state, const InteractionModel& model,
                           const BuiltinCatalog& builtins, const IntentDecl& intent) {
  state.phase = DialoguePhase::Escalated;
  DialogueDirective d;
  d.kind = DialogueDirective::Kind::ElicitSlot;
  d.slot = state.missing.empty() ? (intent.slots.empty() ? "" : intent.slots.front().name)
                                 : state.missing.front();
  d.prompt = escalation_prompt(model, builtins, intent, d.slot);
  return d;
}

// Next directive once the pending frame / missing list is settled.
DialogueDirective advance(DialogueState& state, const IntentDecl& intent) {
  if (!state.missing.empty()) {
    state.phase = DialoguePhase::Eliciting;
    return elicit(intent, state.missing.front());
  }
  if (intent.confirm) {
    state.phase = DialoguePhase::Confirming;
    return confirm(intent, state.pending);
  }
  return fulfill(state);
}

}  // namespace

std::pair<DialogueState, DialogueDirective> dialogue_step(
    const SkillModelBundle& bundle, DialogueState state, const DialogueInput& input,
    const BuiltinCatalog& builtins) {
  const InteractionModel& model = bundle.model;

  if (std::holds_alternative<SemanticFrame>(input)) {
    // session start: take the frame, compute which required slots are open
    state = DialogueState{};
    state.skill_id = bundle.skill_id;
    state.pending = std::get<SemanticFrame>(input);
    const IntentDecl* intent = model.schema.find_intent(state.pending.intent);
    if (!intent) throw BundleError("frame references undeclared intent " +
                                   state.pending.intent);
    for (const auto& slot : intent->slots)
      if (slot.required && !state.pending.slots.count(slot.name))
        state.missing.push_back(slot.name);
    uint32_t required = 0;
    for (const auto& slot : intent->slots)
      if (slot.required) ++required;
    state.step_budget = 3 * required + 2;
    state.steps = 1;
    DialogueDirective d = advance(state, *intent);
    return {std::move(state), std::move(d)};
  }

  if (state.terminal())
    throw BundleError("dialogue_step called on a terminal state");

  const IntentDecl* intent = model.schema.find_intent(state.pending.intent);
  if (!intent)
    throw BundleError("frame references undeclared intent " + state.pending.intent);

  state.steps += 1;
  const std::string answer = normalize(std::get<std::string>(input));

  // hard bound: every transcript goes terminal within the step budget
  auto finish = [&](DialogueState s, DialogueDirective d) {
    if (!s.terminal() && s.steps >= s.step_budget)
      d = escalate(s, model, builtins, *intent);
    return std::make_pair(std::move(s), std::move(d));
  };

  if (state.phase == DialoguePhase::Eliciting) {
    const std::string slot_name = state.missing.empty() ? "" : state.missing.front();
    const SlotDecl* slot = intent->find_slot(slot_name);
    const CustomSlotType* type =
        slot ? resolve_slot_type(model, builtins, slot->type) : nullptr;

    std::optional<SemanticFrame> hit;
    if (type) {
      // short answers go through the same deterministic machinery,
      // restricted to this slot's values
      WeightedGrammar g = build_value_grammar(intent->name, slot_name, *type);
      hit = recognize_deterministic(g, tokenize(answer));
    }
    if (hit && hit->slots.count(slot_name)) {
      SlotFill fill = hit->slots.at(slot_name);
      fill.begin = 0;
      fill.end = 0;  // elicited out-of-band, no span in the original utterance
      state.pending.slots[slot_name] = std::move(fill);
      state.missing.erase(state.missing.begin());
      state.slot_failures = 0;
      DialogueDirective d = advance(state, *intent);
      return finish(std::move(state), std::move(d));
    }
    state.slot_failures += 1;
    if (state.slot_failures >= 3) {
      DialogueDirective d = escalate(state, model, builtins, *intent);
      return {std::move(state), std::move(d)};
    }
    DialogueDirective d = elicit(*intent, slot_name);
    return finish(std::move(state), std::move(d));
  }

  // confirming
  if (kAffirmative.count(answer)) {
    DialogueDirective d = fulfill(state);
    return {std::move(state), std::move(d)};
  }
  // anything non-affirmative counts as a denial
  state.denials += 1;
  if (state.denials > 1) {
    DialogueDirective d = escalate(state, model, builtins, *intent);
    return {std::move(state), std::move(d)};
  }
  // start over from the first required slot
  state.missing.clear();
  for (const auto& slot : intent->slots) {
    if (!slot.required) continue;
    state.pending.slots.erase(slot.name);
    state.missing.push_back(slot.name);
  }
  state.slot_failures = 0;
  DialogueDirective d = advance(state, *intent);
  return finish(std::move(state), std::move(d));
}

}  // namespace slu
