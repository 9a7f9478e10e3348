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

#include "slu/ontology.hpp"

#include <algorithm>

#include <json.hpp>

#include "slu/io.hpp"
#include "slu/text.hpp"

namespace slu {

using nlohmann::json;

const RequiredProperty* ActionTemplate::find_property(std::string_view name) const {
  for (const auto& p : required_properties)
    if (p.name == name) return &p;
  return nullptr;
}

const ActionTemplate* Ontology::find_action(std::string_view name) const {
  for (const auto& a : actions)
    if (a.name == name) return &a;
  return nullptr;
}

const EntityType* Ontology::find_entity(std::string_view name) const {
  for (const auto& e : entities)
    if (e.name == name) return &e;
  return nullptr;
}

Ontology load_ontology(std::string_view json_text) {
  json j = json::parse(json_text, nullptr, false);
  if (j.is_discarded()) throw OntologyError("malformed ontology JSON");

  Ontology onto;
  for (const auto& pj : j.value("properties", json::array())) {
    onto.properties[pj.value("name", std::string())] =
        pj.value("description", std::string());
  }
  for (const auto& ej : j.value("entities", json::array())) {
    EntityType e;
    e.name = ej.value("name", std::string());
    if (e.name.empty()) throw OntologyError("entity without a name");
    for (const auto& p : ej.value("properties", json::array()))
      e.properties.insert(p.get<std::string>());
    for (const auto& v : ej.value("sample_values", json::array()))
      e.sample_values.push_back(normalize(v.get<std::string>()));
    onto.entities.push_back(std::move(e));
  }
  for (const auto& aj : j.value("actions", json::array())) {
    ActionTemplate a;
    a.name = aj.value("name", std::string());
    if (a.name.empty()) throw OntologyError("action without a name");
    for (const auto& pj : aj.value("required_properties", json::array())) {
      RequiredProperty rp;
      rp.name = pj.value("name", std::string());
      if (rp.name.empty())
        throw OntologyError("action " + a.name + ": required property without a name");
      rp.requires_property = pj.value("requires", rp.name);
      rp.description = pj.value("description", std::string());
      a.required_properties.push_back(std::move(rp));
    }
    for (const auto& tj : aj.value("carrier_templates", json::array())) {
      std::string line = "X " + tj.get<std::string>();  // reuse the sample parser
      auto parsed = parse_sample_utterances(line);
      if (parsed.size() != 1)
        throw OntologyError("action " + a.name + ": bad carrier template");
      a.carrier_templates.push_back(std::move(parsed[0].tokens));
    }
    // every placeholder must name a required property
    for (const auto& tmpl : a.carrier_templates) {
      for (const auto& tok : tmpl) {
        if (tok.is_slot() && !a.find_property(tok.text))
          throw OntologyError("action " + a.name + ": carrier template references {" +
                              tok.text + "} which is not a required property");
      }
    }
    onto.actions.push_back(std::move(a));
  }
  return onto;
}

Ontology load_ontology_file(const std::filesystem::path& path) {
  return load_ontology(read_file(path));
}

std::vector<std::string> CompatibilityResult::missing() const {
  std::vector<std::string> out;
  for (const auto& g : gaps) out.push_back(g.requires_property);
  return out;
}

CompatibilityResult check_compatibility(const Ontology& ontology,
                                        const ActionTemplate& action,
                                        const PropertyBinding& binding) {
  for (const auto& [prop, entity] : binding) {
    if (!action.find_property(prop))
      throw OntologyError("unknown property \"" + prop + "\" for action " + action.name);
    if (!ontology.find_entity(entity))
      throw OntologyError("unknown entity type \"" + entity + "\"");
  }

  CompatibilityResult result;
  for (const auto& rp : action.required_properties) {
    auto it = binding.find(rp.name);
    if (it == binding.end()) {
      result.gaps.push_back(
          {rp.name, rp.requires_property, PropertyGap::Reason::Unbound, ""});
      continue;
    }
    const EntityType* entity = ontology.find_entity(it->second);
    if (!entity->has_property(rp.requires_property)) {
      result.gaps.push_back({rp.name, rp.requires_property,
                             PropertyGap::Reason::NotPossessed, entity->name});
    }
  }
  result.compatible = result.gaps.empty();
  return result;
}

InteractionModel CompiledIntent::as_interaction_model() const {
  InteractionModel model;
  IntentDecl intent;
  intent.name = name;
  intent.slots = slots;
  model.schema.intents.push_back(std::move(intent));
  model.slot_types = slot_types;
  model.samples = samples;
  model.invocation_name = "compiled intent";  // placeholder; fragment only
  return model;
}

CompiledIntent compile_builtin_intent(const Ontology& ontology,
                                      const ActionTemplate& action,
                                      const PropertyBinding& binding) {
  if (action.carrier_templates.empty())
    throw OntologyError("action " + action.name + ": no surface forms");

  // properties actually used by the carrier templates
  std::set<std::string> used;
  for (const auto& tmpl : action.carrier_templates)
    for (const auto& tok : tmpl)
      if (tok.is_slot()) used.insert(tok.text);

  CompatibilityResult compat = check_compatibility(ontology, action, binding);
  for (const auto& gap : compat.gaps) {
    if (!used.count(gap.property)) continue;  // unused property, not needed
    if (gap.reason == PropertyGap::Reason::Unbound)
      throw OntologyError("action " + action.name + ": carrier template references {" +
                          gap.property + "} but it is unbound");
    throw OntologyError("action " + action.name + ": entity " + gap.entity +
                        " lacks required property " + gap.requires_property);
  }

  CompiledIntent out;
  out.name = action.name;
  for (const auto& rp : action.required_properties) {
    auto it = binding.find(rp.name);
    if (it != binding.end()) out.name += "." + it->second;
  }

  std::set<std::string> added_types;
  for (const auto& rp : action.required_properties) {
    if (!used.count(rp.name)) continue;
    const std::string& entity_name = binding.at(rp.name);
    const EntityType* entity = ontology.find_entity(entity_name);
    SlotDecl slot;
    slot.name = rp.name;  // the semantic role comes straight from the template
    slot.type = entity_name;
    out.slots.push_back(std::move(slot));
    if (added_types.insert(entity_name).second) {
      CustomSlotType type;
      type.name = entity_name;
      type.values = entity->sample_values;
      out.slot_types.push_back(std::move(type));
    }
  }

  for (const auto& tmpl : action.carrier_templates) {
    LabeledUtterance u;
    u.intent = out.name;
    u.tokens = tmpl;
    out.samples.push_back(std::move(u));
  }
  return out;
}

}  // namespace slu
