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
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "slu/interaction_model.hpp"

namespace slu {

class OntologyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EntityType {
  std::string name;
  std::set<std::string> properties;        // properties the entity possesses
  std::vector<std::string> sample_values;  // surface forms, normalized

  bool has_property(std::string_view p) const { return properties.count(std::string(p)) > 0; }
};

// A required property of an action. `name` doubles as the semantic role of
// the slot in compiled intents; `requires` is the capability the bound
// entity type must possess (defaults to `name`).
struct RequiredProperty {
  std::string name;
  std::string requires_property;
  std::string description;
};

struct ActionTemplate {
  std::string name;
  std::vector<RequiredProperty> required_properties;
  // Token templates whose slot references name required properties,
  // e.g. "add {object} to my {targetCollection}".
  std::vector<std::vector<TemplateToken>> carrier_templates;

  const RequiredProperty* find_property(std::string_view name) const;
};

struct Ontology {
  std::vector<ActionTemplate> actions;
  std::vector<EntityType> entities;
  // property identifier -> description; informational
  std::map<std::string, std::string> properties;

  const ActionTemplate* find_action(std::string_view name) const;
  const EntityType* find_entity(std::string_view name) const;
};

Ontology load_ontology(std::string_view json_text);
Ontology load_ontology_file(const std::filesystem::path& path);

// --- compatibility ----------------------------------------------------------

struct PropertyGap {
  enum class Reason { Unbound, NotPossessed };
  std::string property;          // required property name (the role)
  std::string requires_property; // capability the entity must possess
  Reason reason;
  std::string entity;            // bound entity, for NotPossessed
};

struct CompatibilityResult {
  bool compatible = false;
  std::vector<PropertyGap> gaps;

  // Capability identifiers that are missing, one per gap.
  std::vector<std::string> missing() const;
};

using PropertyBinding = std::map<std::string, std::string>;  // property -> entity type

// Compatible iff every required property is bound to an entity type that
// possesses the property's required capability. Throws OntologyError if the
// binding names an unknown property or entity.
CompatibilityResult check_compatibility(const Ontology& ontology,
                                        const ActionTemplate& action,
                                        const PropertyBinding& binding);

// --- compilation ------------------------------------------------------------

struct CompiledIntent {
  std::string name;                          // `<Action>.<Entity>_<Entity>...`
  std::vector<SlotDecl> slots;               // role name -> entity-named slot type
  std::vector<CustomSlotType> slot_types;    // one per distinct bound entity
  std::vector<LabeledUtterance> samples;     // carrier templates, slot refs kept

  // The compiled fragment as a standalone interaction model, suitable for
  // validate_interaction_model and grammar construction.
  InteractionModel as_interaction_model() const;
};

// Fills an action template with bound entity types. Requires compatibility
// for every property referenced by a carrier template; throws OntologyError
// on incompatible bindings, unbound template references, or an action with
// no carrier templates.
CompiledIntent compile_builtin_intent(const Ontology& ontology,
                                      const ActionTemplate& action,
                                      const PropertyBinding& binding);

}  // namespace slu
