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

#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace slu {

// Raised on malformed developer input (bad JSON, bad line syntax).
// Whole-model consistency problems are reported via ValidationReport instead.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SlotDecl {
  std::string name;
  std::string type;
  // Dialogue extensions; absent in the minimal schema format.
  bool required = false;
  std::string prompt;  // empty -> default prompt at elicitation time
};

struct IntentDecl {
  std::string name;
  std::vector<SlotDecl> slots;
  bool confirm = false;           // ask for confirmation before fulfilling
  std::string confirmation_prompt;

  const SlotDecl* find_slot(std::string_view slot_name) const;
};

struct IntentSchema {
  std::vector<IntentDecl> intents;

  const IntentDecl* find_intent(std::string_view name) const;
};

struct CustomSlotType {
  std::string name;
  std::vector<std::string> values;  // normalized surface strings
};

// One element of an utterance template: a literal token or a `{Slot}` reference.
struct TemplateToken {
  enum class Kind { Literal, SlotRef };
  Kind kind;
  std::string text;  // literal token (normalized) or slot name

  bool is_slot() const { return kind == Kind::SlotRef; }
  friend bool operator==(const TemplateToken&, const TemplateToken&) = default;
};

struct LabeledUtterance {
  std::string intent;
  std::vector<TemplateToken> tokens;

  std::string display() const;  // template in `{Slot}` surface form
};

struct InteractionModel {
  IntentSchema schema;
  std::vector<CustomSlotType> slot_types;
  std::vector<LabeledUtterance> samples;
  std::string invocation_name;

  const CustomSlotType* find_slot_type(std::string_view name) const;
};

struct Violation {
  std::string location;  // e.g. "intent GetHoroscope / slot Sign"
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }
  std::string to_string() const;
};

// Builtin slot types (closed value lists) shipped as a data file. Unknown
// `AMAZON.*`-style references resolve against this catalog.
class BuiltinCatalog {
 public:
  BuiltinCatalog() = default;
  static BuiltinCatalog load(const std::filesystem::path& json_file);
  static BuiltinCatalog from_json(std::string_view json_text);
  // Compiled-in copy of the shipped data file, for library use without
  // an install tree. Kept in sync by test.
  static const BuiltinCatalog& bundled();

  const CustomSlotType* find(std::string_view name) const;
  std::vector<std::string> names() const;

 private:
  std::vector<CustomSlotType> types_;
};

// --- parsing ---------------------------------------------------------------

// Schema JSON: {"intents": [{"intent": "...", "slots": [{"name","type"}]}]}.
IntentSchema parse_intent_schema(std::string_view json_text);

// One sample per line: `IntentName utterance text with {Slot}`.
// Blank lines and `#` comment lines are ignored.
std::vector<LabeledUtterance> parse_sample_utterances(std::string_view text);

// Slot type values: JSON {"name": ..., "values": [...]} or, when the text is
// not a JSON object, one value per line (name taken from `fallback_name`).
CustomSlotType parse_slot_type(std::string_view text, std::string_view fallback_name);

// --- serialization ---------------------------------------------------------

std::string schema_to_json(const IntentSchema& schema, bool pretty = true);
std::string samples_to_text(const std::vector<LabeledUtterance>& samples);
std::string slot_type_to_json(const CustomSlotType& type, bool pretty = true);

// Whole-model canonical JSON (used by build artifacts and bundles).
std::string model_to_json(const InteractionModel& model, bool pretty = false);
InteractionModel model_from_json(std::string_view json_text);

// --- validation ------------------------------------------------------------

ValidationReport validate_interaction_model(const InteractionModel& model,
                                            const BuiltinCatalog& builtins);

// Resolves a slot type reference against the model's custom types first,
// then the builtin catalog. Null when unresolved.
const CustomSlotType* resolve_slot_type(const InteractionModel& model,
                                        const BuiltinCatalog& builtins,
                                        std::string_view type_name);

// Loads schema.json, utterances.txt and slot_types/*.{json,txt} (plus an
// optional skill.json with {"invocation_name", "skill_id"}) from a directory.
struct ModelDir {
  InteractionModel model;
  std::string skill_id;
};
ModelDir load_model_dir(const std::filesystem::path& dir);

}  // namespace slu
