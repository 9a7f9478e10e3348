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

#include "slu/interaction_model.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include <json.hpp>

#include "slu/io.hpp"
#include "slu/text.hpp"

namespace slu {

using nlohmann::json;
namespace fs = std::filesystem;

const SlotDecl* IntentDecl::find_slot(std::string_view slot_name) const {
  for (const auto& s : slots)
    if (s.name == slot_name) return &s;
  return nullptr;
}

const IntentDecl* IntentSchema::find_intent(std::string_view name) const {
  for (const auto& i : intents)
    if (i.name == name) return &i;
  return nullptr;
}

const CustomSlotType* InteractionModel::find_slot_type(std::string_view name) const {
  for (const auto& t : slot_types)
    if (t.name == name) return &t;
  return nullptr;
}

std::string LabeledUtterance::display() const {
  std::vector<std::string> parts;
  parts.reserve(tokens.size());
  for (const auto& t : tokens)
    parts.push_back(t.is_slot() ? "{" + t.text + "}" : t.text);
  return join(parts);
}

std::string ValidationReport::to_string() const {
  std::ostringstream out;
  for (const auto& v : violations) out << v.location << ": " << v.message << "\n";
  return out.str();
}

// --- parsing ---------------------------------------------------------------

namespace {

json parse_json_or_throw(std::string_view text, const char* what) {
  json j = json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded()) throw ParseError(std::string("malformed JSON in ") + what);
  return j;
}

std::string require_string(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key) || !j[key].is_string())
    throw ParseError(where + ": missing \"" + key + "\"");
  return j[key].get<std::string>();
}

}  // namespace

IntentSchema parse_intent_schema(std::string_view json_text) {
  json j = parse_json_or_throw(json_text, "intent schema");
  if (!j.is_object() || !j.contains("intents") || !j["intents"].is_array())
    throw ParseError("intent schema: missing \"intents\" array");

  IntentSchema schema;
  std::set<std::string> seen;
  for (const auto& ij : j["intents"]) {
    if (!ij.is_object()) throw ParseError("intent schema: intent entry is not an object");
    IntentDecl intent;
    // canonical key is "intent"; "name" accepted as an alias
    if (ij.contains("intent") && ij["intent"].is_string())
      intent.name = ij["intent"].get<std::string>();
    else if (ij.contains("name") && ij["name"].is_string())
      intent.name = ij["name"].get<std::string>();
    else
      throw ParseError("intent schema: intent entry missing \"intent\"");
    if (!seen.insert(intent.name).second)
      throw ParseError("intent schema: duplicate intent name \"" + intent.name + "\"");

    intent.confirm = ij.value("confirm", false);
    intent.confirmation_prompt = ij.value("confirmation_prompt", std::string());

    if (ij.contains("slots")) {
      if (!ij["slots"].is_array())
        throw ParseError("intent " + intent.name + ": \"slots\" is not an array");
      for (const auto& sj : ij["slots"]) {
        SlotDecl slot;
        slot.name = require_string(sj, "name", "intent " + intent.name + " slot");
        slot.type = require_string(sj, "type", "intent " + intent.name + " slot");
        slot.required = sj.value("required", false);
        slot.prompt = sj.value("prompt", std::string());
        intent.slots.push_back(std::move(slot));
      }
    }
    schema.intents.push_back(std::move(intent));
  }
  return schema;
}

namespace {

// Parses the template part of a sample line into literal/slot tokens.
std::vector<TemplateToken> parse_template(std::string_view body, const std::string& where) {
  std::vector<TemplateToken> tokens;
  std::string cur;
  auto flush_literals = [&] {
    for (auto& tok : tokenize(cur)) tokens.push_back({TemplateToken::Kind::Literal, tok});
    cur.clear();
  };
  size_t i = 0;
  while (i < body.size()) {
    char c = body[i];
    if (c == '{') {
      flush_literals();
      size_t close = body.find('}', i + 1);
      if (close == std::string_view::npos)
        throw ParseError(where + ": unbalanced '{'");
      std::string name(body.substr(i + 1, close - i - 1));
      if (name.empty()) throw ParseError(where + ": empty slot reference");
      tokens.push_back({TemplateToken::Kind::SlotRef, name});
      i = close + 1;
    } else if (c == '}') {
      throw ParseError(where + ": unbalanced '}'");
    } else {
      cur.push_back(c);
      ++i;
    }
  }
  flush_literals();
  return tokens;
}

}  // namespace

std::vector<LabeledUtterance> parse_sample_utterances(std::string_view text) {
  std::vector<LabeledUtterance> samples;
  size_t line_no = 0;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::string_view sv(line);
    size_t first = sv.find_first_not_of(" \t");
    if (first == std::string_view::npos) continue;  // blank
    if (sv[first] == '#') continue;                 // comment
    std::string where = "line " + std::to_string(line_no);

    size_t sp = sv.find_first_of(" \t", first);
    if (sp == std::string_view::npos)
      throw ParseError(where + ": sample has no utterance body");
    LabeledUtterance u;
    u.intent = std::string(sv.substr(first, sp - first));
    u.tokens = parse_template(sv.substr(sp + 1), where);
    if (u.tokens.empty()) throw ParseError(where + ": sample has no utterance body");
    samples.push_back(std::move(u));
  }
  return samples;
}

CustomSlotType parse_slot_type(std::string_view text, std::string_view fallback_name) {
  CustomSlotType type;
  json j = json::parse(text, nullptr, false);
  if (!j.is_discarded() && j.is_object()) {
    type.name = j.value("name", std::string(fallback_name));
    if (!j.contains("values") || !j["values"].is_array())
      throw ParseError("slot type " + type.name + ": missing \"values\" array");
    for (const auto& v : j["values"]) {
      if (!v.is_string()) throw ParseError("slot type " + type.name + ": non-string value");
      type.values.push_back(normalize(v.get<std::string>()));
    }
  } else {
    type.name = std::string(fallback_name);
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
      std::string v = normalize(line);
      if (!v.empty()) type.values.push_back(std::move(v));
    }
  }
  // drop empty strings left by normalization, keep first occurrence of dups;
  // duplicates are still reported by validation
  std::erase(type.values, std::string());
  return type;
}

// --- serialization ---------------------------------------------------------

namespace {

json schema_to_json_obj(const IntentSchema& schema) {
  json intents = json::array();
  for (const auto& intent : schema.intents) {
    json ij;
    ij["intent"] = intent.name;
    json slots = json::array();
    for (const auto& s : intent.slots) {
      json sj;
      sj["name"] = s.name;
      sj["type"] = s.type;
      if (s.required) sj["required"] = true;
      if (!s.prompt.empty()) sj["prompt"] = s.prompt;
      slots.push_back(std::move(sj));
    }
    if (!slots.empty()) ij["slots"] = std::move(slots);
    if (intent.confirm) ij["confirm"] = true;
    if (!intent.confirmation_prompt.empty())
      ij["confirmation_prompt"] = intent.confirmation_prompt;
    intents.push_back(std::move(ij));
  }
  return json{{"intents", std::move(intents)}};
}

}  // namespace

std::string schema_to_json(const IntentSchema& schema, bool pretty) {
  return schema_to_json_obj(schema).dump(pretty ? 2 : -1);
}

std::string samples_to_text(const std::vector<LabeledUtterance>& samples) {
  std::string out;
  for (const auto& s : samples) {
    out += s.intent;
    out += ' ';
    out += s.display();
    out += '\n';
  }
  return out;
}

std::string slot_type_to_json(const CustomSlotType& type, bool pretty) {
  json j{{"name", type.name}, {"values", type.values}};
  return j.dump(pretty ? 2 : -1);
}

std::string model_to_json(const InteractionModel& model, bool pretty) {
  json j;
  j["schema"] = schema_to_json_obj(model.schema);
  json types = json::array();
  for (const auto& t : model.slot_types)
    types.push_back(json{{"name", t.name}, {"values", t.values}});
  j["slot_types"] = std::move(types);
  j["samples"] = json::array();
  for (const auto& s : model.samples)
    j["samples"].push_back(s.intent + " " + s.display());
  j["invocation_name"] = model.invocation_name;
  return j.dump(pretty ? 2 : -1);
}

InteractionModel model_from_json(std::string_view json_text) {
  json j = parse_json_or_throw(json_text, "interaction model");
  InteractionModel model;
  if (!j.contains("schema")) throw ParseError("interaction model: missing \"schema\"");
  model.schema = parse_intent_schema(j["schema"].dump());
  for (const auto& tj : j.value("slot_types", json::array()))
    model.slot_types.push_back(parse_slot_type(tj.dump(), ""));
  std::string sample_lines;
  for (const auto& sj : j.value("samples", json::array())) {
    if (!sj.is_string()) throw ParseError("interaction model: sample is not a string");
    sample_lines += sj.get<std::string>();
    sample_lines += '\n';
  }
  model.samples = parse_sample_utterances(sample_lines);
  model.invocation_name = j.value("invocation_name", std::string());
  return model;
}

// --- builtin catalog --------------------------------------------------------

BuiltinCatalog BuiltinCatalog::from_json(std::string_view json_text) {
  json j = parse_json_or_throw(json_text, "builtin slot types");
  if (!j.is_object() || !j.contains("types") || !j["types"].is_array())
    throw ParseError("builtin slot types: missing \"types\" array");
  BuiltinCatalog cat;
  for (const auto& tj : j["types"]) cat.types_.push_back(parse_slot_type(tj.dump(), ""));
  return cat;
}

BuiltinCatalog BuiltinCatalog::load(const fs::path& json_file) {
  return from_json(read_file(json_file));
}

const CustomSlotType* BuiltinCatalog::find(std::string_view name) const {
  for (const auto& t : types_)
    if (t.name == name) return &t;
  return nullptr;
}

std::vector<std::string> BuiltinCatalog::names() const {
  std::vector<std::string> out;
  for (const auto& t : types_) out.push_back(t.name);
  return out;
}

// --- validation ------------------------------------------------------------

const CustomSlotType* resolve_slot_type(const InteractionModel& model,
                                        const BuiltinCatalog& builtins,
                                        std::string_view type_name) {
  if (const auto* t = model.find_slot_type(type_name)) return t;
  return builtins.find(type_name);
}

ValidationReport validate_interaction_model(const InteractionModel& model,
                                            const BuiltinCatalog& builtins) {
  ValidationReport report;
  auto add = [&](std::string loc, std::string msg) {
    report.violations.push_back({std::move(loc), std::move(msg)});
  };

  if (model.schema.intents.empty()) add("schema", "schema declares no intents");

  // intents and slot declarations
  std::set<std::string> intent_names;
  for (const auto& intent : model.schema.intents) {
    std::string loc = "intent " + intent.name;
    if (!is_identifier(intent.name)) add(loc, "intent name is not a valid identifier");
    if (!intent_names.insert(intent.name).second) add(loc, "duplicate intent name");
    std::set<std::string> slot_names;
    for (const auto& slot : intent.slots) {
      std::string sloc = loc + " / slot " + slot.name;
      if (!is_identifier(slot.name)) add(sloc, "slot name is not a valid identifier");
      if (!slot_names.insert(slot.name).second) add(sloc, "duplicate slot name");
      if (!resolve_slot_type(model, builtins, slot.type))
        add(sloc, "unresolved slot type \"" + slot.type + "\"");
    }
  }

  // custom slot types
  std::set<std::string> type_names;
  for (const auto& type : model.slot_types) {
    std::string loc = "slot type " + type.name;
    if (!is_identifier(type.name)) add(loc, "slot type name is not a valid identifier");
    if (!type_names.insert(type.name).second) add(loc, "duplicate slot type name");
    if (type.values.empty()) add(loc, "slot type has no values");
    std::set<std::string> seen;
    for (const auto& v : type.values) {
      std::string norm = normalize(v);
      if (norm.empty())
        add(loc, "value normalizes to an empty string");
      else if (!seen.insert(norm).second)
        add(loc, "duplicate value \"" + norm + "\"");
    }
  }

  // samples
  std::set<std::string> intents_with_samples;
  for (size_t i = 0; i < model.samples.size(); ++i) {
    const auto& sample = model.samples[i];
    std::string loc = "sample " + std::to_string(i + 1) + " (" + sample.intent + ")";
    const IntentDecl* intent = model.schema.find_intent(sample.intent);
    if (!intent) {
      add(loc, "sample references undeclared intent");
      continue;
    }
    intents_with_samples.insert(sample.intent);
    if (sample.tokens.empty()) add(loc, "empty template");
    for (const auto& tok : sample.tokens) {
      if (tok.is_slot() && !intent->find_slot(tok.text))
        add(loc, "unresolved slot reference {" + tok.text + "}");
    }
  }
  for (const auto& intent : model.schema.intents) {
    if (!intents_with_samples.count(intent.name))
      add("intent " + intent.name, "intent has no sample utterances");
  }

  if (!is_invocation_name(model.invocation_name))
    add("invocation name", "must be one or more lowercase words");

  return report;
}

// --- model directory --------------------------------------------------------

ModelDir load_model_dir(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  ModelDir out;
  fs::path schema_file = dir / "schema.json";
  fs::path samples_file = dir / "utterances.txt";
  if (!fs::exists(schema_file)) throw IoError("missing " + schema_file.string());
  if (!fs::exists(samples_file)) throw IoError("missing " + samples_file.string());
  out.model.schema = parse_intent_schema(read_file(schema_file));
  out.model.samples = parse_sample_utterances(read_file(samples_file));

  fs::path types_dir = dir / "slot_types";
  if (fs::is_directory(types_dir)) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(types_dir))
      if (entry.is_regular_file()) files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files)
      out.model.slot_types.push_back(parse_slot_type(read_file(f), f.stem().string()));
  }

  out.skill_id = dir.filename().string();
  fs::path skill_file = dir / "skill.json";
  if (fs::exists(skill_file)) {
    json j = parse_json_or_throw(read_file(skill_file), "skill.json");
    out.model.invocation_name = j.value("invocation_name", std::string());
    out.skill_id = j.value("skill_id", out.skill_id);
  }
  if (out.model.invocation_name.empty())
    out.model.invocation_name = normalize(out.skill_id);
  return out;
}

}  // namespace slu
