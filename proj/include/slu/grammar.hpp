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
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "slu/interaction_model.hpp"
#include "slu/semantic_frame.hpp"

namespace slu {

class GrammarError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Dense string <-> id table. Id 0 is reserved for epsilon.
class SymbolTable {
 public:
  SymbolTable() { syms_.push_back("<eps>"); }

  int32_t add(std::string_view sym);
  int32_t find(std::string_view sym) const;  // -1 when absent
  const std::string& name(int32_t id) const { return syms_.at(size_t(id)); }
  size_t size() const { return syms_.size(); }

 private:
  std::vector<std::string> syms_;
  std::unordered_map<std::string, int32_t> ids_;
};

struct Arc {
  int32_t to;
  int32_t ilabel;   // input token id, 0 = epsilon
  int32_t olabel;   // output symbol id, 0 = epsilon
  double weight;    // -log probability, >= 0
  // Unnormalized per-arc mass under each prior mode; reweighting
  // renormalizes these per state.
  double mass_uniform;
  double mass_empirical;
};

enum class PriorMode { MaxEntropy, Empirical };

// Acyclic token-level transducer. Input labels are utterance tokens; output
// labels mark the intent at path start and bracket slot value spans.
struct WeightedGrammar {
  SymbolTable isyms;
  SymbolTable osyms;
  int32_t start = 0;
  int32_t final_state = 1;
  std::vector<std::vector<Arc>> arcs;  // indexed by state

  size_t num_states() const { return arcs.size(); }
  size_t num_arcs() const;

  // Output symbol helpers. Output alphabet uses the reserved shapes
  // `<intent:Name>`, `<open:Slot>`, `<close:Slot>`.
  static std::string intent_symbol(std::string_view intent);
  static std::string open_symbol(std::string_view slot);
  static std::string close_symbol(std::string_view slot);
};

// Compiles a validated interaction model into a grammar whose language is
// exactly the set of sample templates with every slot reference expanded to
// every value of its type. Arc weights follow `mode` (maximum-entropy
// uniform priors by default; empirical template frequencies otherwise).
// Duplicate surface templates across intents produce a warning.
WeightedGrammar build_grammar(const InteractionModel& model,
                              const BuiltinCatalog& builtins,
                              PriorMode mode = PriorMode::MaxEntropy,
                              std::vector<std::string>* warnings = nullptr);

// Reassigns arc weights so that P(intent), P(template | intent) and
// P(value | slot) are each uniform. Per-state outgoing probability mass is
// exactly 1 afterwards.
void apply_max_entropy_priors(WeightedGrammar& g);

// The configurable switch off: weights follow the empirical distribution of
// the developer's sample utterances instead.
void apply_empirical_priors(WeightedGrammar& g);

// Max per-state |sum of outgoing probabilities - 1| (0 for stateless finals).
double max_stochasticity_gap(const WeightedGrammar& g);

// Exact-match recognition. Returns the frame decoded from the accepting
// path, confidence 1.0, source deterministic; nullopt when the tokens are
// out of grammar. Ties (several accepting paths) are broken by lowest path
// weight, then lexicographically smallest intent name, then output labels.
std::optional<SemanticFrame> recognize_deterministic(
    const WeightedGrammar& g, const std::vector<std::string>& tokens);

struct SampledUtterance {
  std::vector<std::string> tokens;
  SemanticFrame frame;
};

// Draws n i.i.d. paths according to the arc distribution. Deterministic for
// a given seed.
std::vector<SampledUtterance> sample_utterances(const WeightedGrammar& g,
                                                size_t n, uint64_t seed);

struct GrammarPath {
  std::vector<std::string> tokens;
  SemanticFrame frame;
  double probability;
};

// Depth-first enumeration of every accepting path, in deterministic order.
// Throws GrammarError when the grammar holds more than `limit` paths.
std::vector<GrammarPath> enumerate_paths(const WeightedGrammar& g, size_t limit);

size_t count_paths(const WeightedGrammar& g);

// One-slot grammar accepting exactly the values of `type`, used for
// slot-restricted re-recognition of elicitation answers.
WeightedGrammar build_value_grammar(std::string_view intent_name,
                                    std::string_view slot_name,
                                    const CustomSlotType& type);

// --- serialization ----------------------------------------------------------

// Versioned binary image (magic, symbol tables, arcs, masses).
std::string grammar_to_bytes(const WeightedGrammar& g);
WeightedGrammar grammar_from_bytes(std::string_view bytes);

// Debug text form, one arc per line: `from to ilabel olabel weight`,
// final states as single-field lines.
std::string grammar_to_text(const WeightedGrammar& g);

}  // namespace slu
