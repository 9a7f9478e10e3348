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

#include "slu/grammar.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <unordered_set>

#include "slu/io.hpp"
#include "slu/rng.hpp"
#include "slu/text.hpp"

namespace slu {

int32_t SymbolTable::add(std::string_view sym) {
  auto it = ids_.find(std::string(sym));
  if (it != ids_.end()) return it->second;
  int32_t id = int32_t(syms_.size());
  syms_.emplace_back(sym);
  ids_.emplace(syms_.back(), id);
  return id;
}

int32_t SymbolTable::find(std::string_view sym) const {
  auto it = ids_.find(std::string(sym));
  return it == ids_.end() ? -1 : it->second;
}

size_t WeightedGrammar::num_arcs() const {
  size_t n = 0;
  for (const auto& a : arcs) n += a.size();
  return n;
}

std::string WeightedGrammar::intent_symbol(std::string_view intent) {
  return "<intent:" + std::string(intent) + ">";
}
std::string WeightedGrammar::open_symbol(std::string_view slot) {
  return "<open:" + std::string(slot) + ">";
}
std::string WeightedGrammar::close_symbol(std::string_view slot) {
  return "<close:" + std::string(slot) + ">";
}

namespace {

struct OutputEvent {
  enum class Kind { Intent, Open, Close };
  Kind kind;
  std::string name;
};

// Parses `<intent:X>` / `<open:X>` / `<close:X>`.
std::optional<OutputEvent> parse_output_symbol(const std::string& sym) {
  auto inner = [&](size_t prefix_len) {
    return sym.substr(prefix_len, sym.size() - prefix_len - 1);
  };
  if (sym.starts_with("<intent:")) return OutputEvent{OutputEvent::Kind::Intent, inner(8)};
  if (sym.starts_with("<open:")) return OutputEvent{OutputEvent::Kind::Open, inner(6)};
  if (sym.starts_with("<close:")) return OutputEvent{OutputEvent::Kind::Close, inner(7)};
  return std::nullopt;
}

// Decodes the (olabel, token position) event list of one path into a frame.
SemanticFrame frame_from_events(const WeightedGrammar& g,
                                const std::vector<std::pair<int32_t, uint32_t>>& events,
                                const std::vector<std::string>& tokens) {
  SemanticFrame frame;
  frame.confidence = 1.0;
  frame.source = FrameSource::Deterministic;
  std::string open_slot;
  uint32_t open_pos = 0;
  for (const auto& [olabel, pos] : events) {
    auto ev = parse_output_symbol(g.osyms.name(olabel));
    if (!ev) continue;
    switch (ev->kind) {
      case OutputEvent::Kind::Intent:
        frame.intent = ev->name;
        break;
      case OutputEvent::Kind::Open:
        open_slot = ev->name;
        open_pos = pos;
        break;
      case OutputEvent::Kind::Close: {
        SlotFill fill;
        fill.begin = open_pos;
        fill.end = pos;
        std::vector<std::string> span(tokens.begin() + open_pos, tokens.begin() + pos);
        fill.value = join(span);
        frame.slots[ev->name] = std::move(fill);
        break;
      }
    }
  }
  return frame;
}

int32_t new_state(WeightedGrammar& g) {
  g.arcs.emplace_back();
  return int32_t(g.arcs.size() - 1);
}

struct ArcRef {
  int32_t state;
  size_t index;
};

Arc& deref(WeightedGrammar& g, ArcRef r) { return g.arcs[size_t(r.state)][r.index]; }

ArcRef add_arc(WeightedGrammar& g, int32_t from, int32_t to, int32_t ilabel,
               int32_t olabel, double mass_u, double mass_e) {
  g.arcs[size_t(from)].push_back(Arc{to, ilabel, olabel, 0.0, mass_u, mass_e});
  return {from, g.arcs[size_t(from)].size() - 1};
}

// Trie node bookkeeping during construction.
struct TrieNode {
  int32_t state;
  // edge key -> (mass-carrying arc, child node index)
  std::map<std::string, std::pair<ArcRef, size_t>> edges;
  double stop_u = 0;
  double stop_e = 0;
};

}  // namespace

WeightedGrammar build_grammar(const InteractionModel& model,
                              const BuiltinCatalog& builtins,
                              PriorMode mode,
                              std::vector<std::string>* warnings) {
  WeightedGrammar g;
  g.start = new_state(g);
  g.final_state = new_state(g);

  // group samples by intent, dedup templates, keep counts
  struct IntentTemplates {
    std::string name;
    std::vector<std::pair<std::vector<TemplateToken>, double>> templates;  // tokens, count
    double total_samples = 0;
  };
  std::vector<IntentTemplates> intents;
  std::map<std::string, size_t> intent_index;
  for (const auto& intent : model.schema.intents) {
    intent_index[intent.name] = intents.size();
    intents.push_back({intent.name, {}, 0});
  }
  for (const auto& sample : model.samples) {
    auto it = intent_index.find(sample.intent);
    if (it == intent_index.end())
      throw GrammarError("sample for undeclared intent " + sample.intent);
    auto& bucket = intents[it->second];
    bucket.total_samples += 1;
    bool found = false;
    for (auto& [tokens, count] : bucket.templates) {
      if (tokens == sample.tokens) {
        count += 1;
        found = true;
        break;
      }
    }
    if (!found) bucket.templates.push_back({sample.tokens, 1.0});
  }

  // cross-intent duplicate surface warning
  if (warnings) {
    std::map<std::string, std::string> first_seen;
    for (const auto& bucket : intents) {
      const IntentDecl* decl = model.schema.find_intent(bucket.name);
      for (const auto& [tokens, count] : bucket.templates) {
        std::string sig;
        for (const auto& t : tokens) {
          if (t.is_slot()) {
            const SlotDecl* slot = decl ? decl->find_slot(t.text) : nullptr;
            sig += "\x01" + (slot ? slot->type : t.text);
          } else {
            sig += t.text;
          }
          sig += "\x02";
        }
        auto [it, inserted] = first_seen.try_emplace(sig, bucket.name);
        if (!inserted && it->second != bucket.name) {
          warnings->push_back("template collision between intents " + it->second +
                              " and " + bucket.name +
                              "; recognition breaks ties by weight, then intent name");
        }
      }
    }
  }

  size_t n_intents = 0;
  for (const auto& bucket : intents)
    if (!bucket.templates.empty()) ++n_intents;
  if (n_intents == 0) throw GrammarError("model has no sample utterances");

  std::deque<TrieNode> nodes;  // stable addresses
  auto make_node = [&]() -> size_t {
    nodes.push_back(TrieNode{new_state(g), {}, 0, 0});
    return nodes.size() - 1;
  };

  for (const auto& bucket : intents) {
    if (bucket.templates.empty()) continue;
    const IntentDecl* decl = model.schema.find_intent(bucket.name);
    size_t root = make_node();
    add_arc(g, g.start, nodes[root].state,
            0, g.osyms.add(WeightedGrammar::intent_symbol(bucket.name)),
            1.0, bucket.total_samples);

    for (const auto& [tokens, count] : bucket.templates) {
      if (tokens.empty())
        throw GrammarError("intent " + bucket.name + ": template expands to zero tokens");
      size_t node = root;
      for (const auto& tok : tokens) {
        std::string key = tok.is_slot() ? "\x01" + tok.text : tok.text;
        auto it = nodes[node].edges.find(key);
        if (it != nodes[node].edges.end()) {
          Arc& mass_arc = deref(g, it->second.first);
          mass_arc.mass_uniform += 1.0;
          mass_arc.mass_empirical += count;
          node = it->second.second;
          continue;
        }
        size_t child = make_node();
        ArcRef mass_arc{};
        if (!tok.is_slot()) {
          mass_arc = add_arc(g, nodes[node].state, nodes[child].state,
                             g.isyms.add(tok.text), 0, 1.0, count);
        } else {
          const SlotDecl* slot = decl ? decl->find_slot(tok.text) : nullptr;
          if (!slot)
            throw GrammarError("intent " + bucket.name + ": unresolved slot reference {" +
                               tok.text + "}");
          const CustomSlotType* type = resolve_slot_type(model, builtins, slot->type);
          if (!type)
            throw GrammarError("slot " + tok.text + ": unresolved slot type " + slot->type);

          // slot region: <open> branch over value token paths, <close>
          int32_t region = new_state(g);
          mass_arc = add_arc(g, nodes[node].state, region, 0,
                             g.osyms.add(WeightedGrammar::open_symbol(tok.text)),
                             1.0, count);
          int32_t close_olabel = g.osyms.add(WeightedGrammar::close_symbol(tok.text));
          size_t n_values = 0;
          for (const auto& value : type->values) {
            std::vector<std::string> vtokens = tokenize(value);
            if (vtokens.empty()) continue;
            ++n_values;
            int32_t cur = region;
            for (const auto& vtoken : vtokens) {
              int32_t next = new_state(g);
              add_arc(g, cur, next, g.isyms.add(vtoken), 0, 1.0, 1.0);
              cur = next;
            }
            add_arc(g, cur, nodes[child].state, 0, close_olabel, 1.0, 1.0);
          }
          if (n_values == 0)
            throw GrammarError("slot type " + type->name + " has an empty value list");
        }
        nodes[node].edges.emplace(key, std::make_pair(mass_arc, child));
        node = child;
      }
      nodes[node].stop_u += 1.0;
      nodes[node].stop_e += count;
    }
  }

  // stop arcs route template ends to the shared final state
  for (const auto& node : nodes) {
    if (node.stop_u > 0)
      add_arc(g, node.state, g.final_state, 0, 0, node.stop_u, node.stop_e);
  }

  if (mode == PriorMode::MaxEntropy)
    apply_max_entropy_priors(g);
  else
    apply_empirical_priors(g);
  return g;
}

namespace {

void reweight(WeightedGrammar& g, bool uniform) {
  for (auto& state_arcs : g.arcs) {
    if (state_arcs.empty()) continue;
    double total = 0;
    for (const auto& a : state_arcs) total += uniform ? a.mass_uniform : a.mass_empirical;
    if (total <= 0) throw GrammarError("state with zero outgoing mass");
    for (auto& a : state_arcs) {
      double mass = uniform ? a.mass_uniform : a.mass_empirical;
      a.weight = -std::log(mass / total);
      if (a.weight < 0 && a.weight > -1e-12) a.weight = 0;  // clean -0
    }
  }
}

}  // namespace

void apply_max_entropy_priors(WeightedGrammar& g) { reweight(g, true); }
void apply_empirical_priors(WeightedGrammar& g) { reweight(g, false); }

double max_stochasticity_gap(const WeightedGrammar& g) {
  double worst = 0;
  for (const auto& state_arcs : g.arcs) {
    if (state_arcs.empty()) continue;
    double total = 0;
    for (const auto& a : state_arcs) total += std::exp(-a.weight);
    worst = std::max(worst, std::abs(total - 1.0));
  }
  return worst;
}

// --- recognition -------------------------------------------------------------

namespace {

// Topological order; throws if the grammar has a cycle.
std::vector<int32_t> topo_order(const WeightedGrammar& g) {
  size_t n = g.num_states();
  std::vector<int> indeg(n, 0);
  for (const auto& state_arcs : g.arcs)
    for (const auto& a : state_arcs) indeg[size_t(a.to)]++;
  std::vector<int32_t> order;
  order.reserve(n);
  std::deque<int32_t> ready;
  for (size_t s = 0; s < n; ++s)
    if (indeg[s] == 0) ready.push_back(int32_t(s));
  while (!ready.empty()) {
    int32_t s = ready.front();
    ready.pop_front();
    order.push_back(s);
    for (const auto& a : g.arcs[size_t(s)])
      if (--indeg[size_t(a.to)] == 0) ready.push_back(a.to);
  }
  if (order.size() != n) throw GrammarError("grammar has a cycle");
  return order;
}

struct TokenBounds {
  std::vector<int> min_rem;
  std::vector<int> max_rem;
};

constexpr int kUnreachable = std::numeric_limits<int>::max();

// Per state: min/max input tokens on any path to the final state.
TokenBounds token_bounds(const WeightedGrammar& g) {
  auto order = topo_order(g);
  size_t n = g.num_states();
  TokenBounds b{std::vector<int>(n, kUnreachable), std::vector<int>(n, -1)};
  b.min_rem[size_t(g.final_state)] = 0;
  b.max_rem[size_t(g.final_state)] = 0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    int32_t s = *it;
    for (const auto& a : g.arcs[size_t(s)]) {
      int step = a.ilabel == 0 ? 0 : 1;
      if (b.min_rem[size_t(a.to)] != kUnreachable)
        b.min_rem[size_t(s)] =
            std::min(b.min_rem[size_t(s)], b.min_rem[size_t(a.to)] + step);
      if (b.max_rem[size_t(a.to)] >= 0)
        b.max_rem[size_t(s)] =
            std::max(b.max_rem[size_t(s)], b.max_rem[size_t(a.to)] + step);
    }
  }
  return b;
}

struct AcceptedPath {
  double weight = 0;
  std::string intent;
  std::vector<std::pair<int32_t, uint32_t>> events;  // (olabel, token pos)

  bool better_than(const AcceptedPath& other) const {
    if (weight != other.weight) return weight < other.weight;
    if (intent != other.intent) return intent < other.intent;
    return events < other.events;
  }
};

class Recognizer {
 public:
  Recognizer(const WeightedGrammar& g, const std::vector<int32_t>& input,
             const TokenBounds& bounds)
      : g_(g), input_(input), bounds_(bounds) {}

  std::optional<AcceptedPath> best() {
    dfs(g_.start, 0, 0.0);
    return best_;
  }

 private:
  // Explores every accepting path; keeps the tie-broken best.
  // Returns true when the subtree yielded at least one acceptance.
  bool dfs(int32_t state, size_t pos, double weight) {
    int rem = int(input_.size() - pos);
    if (bounds_.min_rem[size_t(state)] == kUnreachable ||
        rem < bounds_.min_rem[size_t(state)] || rem > bounds_.max_rem[size_t(state)])
      return false;
    uint64_t key = uint64_t(state) * (input_.size() + 1) + pos;
    if (dead_.count(key)) return false;

    bool found = false;
    if (state == g_.final_state && pos == input_.size()) {
      record(weight);
      found = true;
    }
    for (const auto& a : g_.arcs[size_t(state)]) {
      size_t next_pos = pos;
      if (a.ilabel != 0) {
        if (pos == input_.size() || input_[pos] != a.ilabel) continue;
        next_pos = pos + 1;
      }
      bool emitted = false;
      if (a.olabel != 0) {
        events_.push_back({a.olabel, uint32_t(pos)});
        emitted = true;
      }
      found |= dfs(a.to, next_pos, weight + a.weight);
      if (emitted) events_.pop_back();
    }
    if (!found) dead_.insert(key);
    return found;
  }

  void record(double weight) {
    AcceptedPath path;
    path.weight = weight;
    path.events = events_;
    for (const auto& [olabel, pos] : events_) {
      auto ev = parse_output_symbol(g_.osyms.name(olabel));
      if (ev && ev->kind == OutputEvent::Kind::Intent) {
        path.intent = ev->name;
        break;
      }
    }
    if (!best_ || path.better_than(*best_)) best_ = std::move(path);
  }

  const WeightedGrammar& g_;
  const std::vector<int32_t>& input_;
  const TokenBounds& bounds_;
  std::vector<std::pair<int32_t, uint32_t>> events_;
  std::optional<AcceptedPath> best_;
  std::unordered_set<uint64_t> dead_;
};

}  // namespace

std::optional<SemanticFrame> recognize_deterministic(
    const WeightedGrammar& g, const std::vector<std::string>& tokens) {
  std::vector<int32_t> input;
  input.reserve(tokens.size());
  for (const auto& t : tokens) {
    int32_t id = g.isyms.find(t);
    if (id < 0) return std::nullopt;  // token outside the grammar alphabet
    input.push_back(id);
  }
  TokenBounds bounds = token_bounds(g);
  Recognizer rec(g, input, bounds);
  auto path = rec.best();
  if (!path) return std::nullopt;
  return frame_from_events(g, path->events, tokens);
}

// --- sampling ----------------------------------------------------------------

std::vector<SampledUtterance> sample_utterances(const WeightedGrammar& g,
                                                size_t n, uint64_t seed) {
  if (n == 0) throw GrammarError("sample count must be >= 1");
  Rng rng(seed);
  std::vector<SampledUtterance> out;
  out.reserve(n);
  for (size_t i = 0; i < n; ++i) {
    int32_t state = g.start;
    std::vector<std::string> tokens;
    std::vector<std::pair<int32_t, uint32_t>> events;
    while (state != g.final_state) {
      const auto& arcs = g.arcs[size_t(state)];
      if (arcs.empty()) throw GrammarError("stranded state during sampling");
      double r = rng.uniform();
      double acc = 0;
      const Arc* chosen = &arcs.back();
      for (const auto& a : arcs) {
        acc += std::exp(-a.weight);
        if (r < acc) {
          chosen = &a;
          break;
        }
      }
      if (chosen->olabel != 0) events.push_back({chosen->olabel, uint32_t(tokens.size())});
      if (chosen->ilabel != 0) tokens.push_back(g.isyms.name(chosen->ilabel));
      state = chosen->to;
    }
    SemanticFrame frame = frame_from_events(g, events, tokens);
    out.push_back({std::move(tokens), std::move(frame)});
  }
  return out;
}

// --- enumeration ---------------------------------------------------------------

namespace {

void enumerate_dfs(const WeightedGrammar& g, int32_t state, double weight,
                   std::vector<std::string>& tokens,
                   std::vector<std::pair<int32_t, uint32_t>>& events,
                   std::vector<GrammarPath>& out, size_t limit) {
  if (state == g.final_state) {
    if (out.size() >= limit)
      throw GrammarError("path limit exceeded (" + std::to_string(limit) + ")");
    GrammarPath p;
    p.tokens = tokens;
    p.frame = frame_from_events(g, events, tokens);
    p.probability = std::exp(-weight);
    out.push_back(std::move(p));
    return;
  }
  for (const auto& a : g.arcs[size_t(state)]) {
    bool emitted = false;
    if (a.olabel != 0) {
      events.push_back({a.olabel, uint32_t(tokens.size())});
      emitted = true;
    }
    bool consumed = false;
    if (a.ilabel != 0) {
      tokens.push_back(g.isyms.name(a.ilabel));
      consumed = true;
    }
    enumerate_dfs(g, a.to, weight + a.weight, tokens, events, out, limit);
    if (consumed) tokens.pop_back();
    if (emitted) events.pop_back();
  }
}

}  // namespace

std::vector<GrammarPath> enumerate_paths(const WeightedGrammar& g, size_t limit) {
  std::vector<GrammarPath> out;
  std::vector<std::string> tokens;
  std::vector<std::pair<int32_t, uint32_t>> events;
  enumerate_dfs(g, g.start, 0.0, tokens, events, out, limit);
  return out;
}

size_t count_paths(const WeightedGrammar& g) {
  auto order = topo_order(g);
  std::vector<size_t> counts(g.num_states(), 0);
  counts[size_t(g.final_state)] = 1;
  constexpr size_t kCap = std::numeric_limits<size_t>::max() / 2;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    for (const auto& a : g.arcs[size_t(*it)]) {
      size_t c = counts[size_t(a.to)];
      counts[size_t(*it)] = std::min(kCap, counts[size_t(*it)] + c);
    }
  }
  return counts[size_t(g.start)];
}

WeightedGrammar build_value_grammar(std::string_view intent_name,
                                    std::string_view slot_name,
                                    const CustomSlotType& type) {
  InteractionModel model;
  IntentDecl intent;
  intent.name = std::string(intent_name);
  intent.slots.push_back({std::string(slot_name), type.name});
  model.schema.intents.push_back(std::move(intent));
  model.slot_types.push_back(type);
  LabeledUtterance sample;
  sample.intent = std::string(intent_name);
  sample.tokens.push_back({TemplateToken::Kind::SlotRef, std::string(slot_name)});
  model.samples.push_back(std::move(sample));
  model.invocation_name = "answer";
  return build_grammar(model, BuiltinCatalog(), PriorMode::MaxEntropy);
}

// --- serialization -------------------------------------------------------------

namespace {
constexpr char kMagic[4] = {'S', 'L', 'U', 'G'};
constexpr uint32_t kVersion = 1;

void write_symbols(BinaryWriter& w, const SymbolTable& t) {
  w.u64(t.size() - 1);
  for (size_t i = 1; i < t.size(); ++i) w.str(t.name(int32_t(i)));
}

void read_symbols(BinaryReader& r, SymbolTable& t) {
  uint64_t n = r.u64();
  for (uint64_t i = 0; i < n; ++i) t.add(r.str());
}
}  // namespace

std::string grammar_to_bytes(const WeightedGrammar& g) {
  BinaryWriter w;
  w.bytes(std::string_view(kMagic, 4));
  w.u32(kVersion);
  write_symbols(w, g.isyms);
  write_symbols(w, g.osyms);
  w.u32(uint32_t(g.num_states()));
  w.u32(uint32_t(g.start));
  w.u32(uint32_t(g.final_state));
  for (const auto& state_arcs : g.arcs) {
    w.u32(uint32_t(state_arcs.size()));
    for (const auto& a : state_arcs) {
      w.u32(uint32_t(a.to));
      w.u32(uint32_t(a.ilabel));
      w.u32(uint32_t(a.olabel));
      w.f64(a.weight);
      w.f64(a.mass_uniform);
      w.f64(a.mass_empirical);
    }
  }
  return w.take();
}

WeightedGrammar grammar_from_bytes(std::string_view bytes) {
  BinaryReader r(bytes);
  if (r.bytes(4) != std::string(kMagic, 4)) throw GrammarError("bad grammar magic");
  uint32_t version = r.u32();
  if (version != kVersion)
    throw GrammarError("unsupported grammar version " + std::to_string(version));
  WeightedGrammar g;
  read_symbols(r, g.isyms);
  read_symbols(r, g.osyms);
  uint32_t n_states = r.u32();
  g.start = int32_t(r.u32());
  g.final_state = int32_t(r.u32());
  g.arcs.assign(n_states, {});
  for (uint32_t s = 0; s < n_states; ++s) {
    uint32_t n_arcs = r.u32();
    g.arcs[s].reserve(n_arcs);
    for (uint32_t i = 0; i < n_arcs; ++i) {
      Arc a;
      a.to = int32_t(r.u32());
      a.ilabel = int32_t(r.u32());
      a.olabel = int32_t(r.u32());
      a.weight = r.f64();
      a.mass_uniform = r.f64();
      a.mass_empirical = r.f64();
      if (size_t(a.to) >= n_states) throw GrammarError("arc target out of range");
      g.arcs[s].push_back(a);
    }
  }
  return g;
}

std::string grammar_to_text(const WeightedGrammar& g) {
  std::ostringstream out;
  for (size_t s = 0; s < g.num_states(); ++s) {
    for (const auto& a : g.arcs[s]) {
      out << s << '\t' << a.to << '\t' << g.isyms.name(a.ilabel) << '\t'
          << g.osyms.name(a.olabel) << '\t' << a.weight << '\n';
    }
  }
  out << g.final_state << '\n';
  return out.str();
}

}  // namespace slu
