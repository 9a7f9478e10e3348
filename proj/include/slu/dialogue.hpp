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
#include <variant>
#include <vector>

#include "slu/bundle.hpp"
#include "slu/semantic_frame.hpp"

namespace slu {

struct DialogueDirective {
  enum class Kind { ElicitSlot, ConfirmIntent, Fulfill };
  Kind kind = Kind::Fulfill;
  std::string slot;    // ElicitSlot
  std::string prompt;  // ElicitSlot / ConfirmIntent
  SemanticFrame frame; // Fulfill

  std::string to_json() const;
};

enum class DialoguePhase { Eliciting, Confirming, Fulfilled, Escalated };

// Per-session state of the procedural dialogue subroutines. Owned by a
// single session; never shared.
struct DialogueState {
  std::string skill_id;
  SemanticFrame pending;
  std::vector<std::string> missing;  // required slots, declaration order
  DialoguePhase phase = DialoguePhase::Eliciting;
  uint32_t slot_failures = 0;  // consecutive misses on the slot being elicited
  uint32_t denials = 0;
  uint32_t steps = 0;
  uint32_t step_budget = 0;

  bool terminal() const {
    return phase == DialoguePhase::Fulfilled || phase == DialoguePhase::Escalated;
  }
};

// The first input is the recognized frame; subsequent inputs are the user's
// answers to directives.
using DialogueInput = std::variant<SemanticFrame, std::string>;

// One transition of the dialogue subroutine state machine: elicits missing
// required slots one at a time (answers re-recognized against a one-slot
// grammar), asks for confirmation when the intent requires it, and always
// terminates within 3 * #required-slots + 2 steps (escalating rather than
// looping).
std::pair<DialogueState, DialogueDirective> dialogue_step(
    const SkillModelBundle& bundle, DialogueState state, const DialogueInput& input,
    const BuiltinCatalog& builtins = BuiltinCatalog::bundled());

}  // namespace slu
