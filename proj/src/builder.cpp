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

#include "slu/builder.hpp"

#include <chrono>
#include <set>
#include <sstream>

#include <json.hpp>

#include "slu/crf.hpp"
#include "slu/feature_extraction.hpp"
#include "slu/grammar.hpp"
#include "slu/hashing.hpp"
#include "slu/io.hpp"
#include "slu/maxent.hpp"
#include "slu/text.hpp"

namespace slu {

using nlohmann::json;

// --- BuildConfig -----------------------------------------------------------------

std::map<std::string, std::string> BuildConfig::to_params() const {
  return {
      {"priors", priors},
      {"sample_count", std::to_string(sample_count)},
      {"seed", std::to_string(seed)},
      {"target_fpr", std::to_string(target_fpr)},
      {"epochs", std::to_string(epochs)},
      {"learning_rate", std::to_string(learning_rate)},
      {"l1", std::to_string(l1)},
      {"l2", std::to_string(l2)},
      {"knowledge_dropout", std::to_string(knowledge_dropout)},
      {"hash_bits", std::to_string(hash_bits)},
      {"hash_seed", std::to_string(hash_seed)},
      {"rejection_threshold", std::to_string(rejection_threshold)},
      {"slots_first", slots_first ? "true" : "false"},
      {"version", std::to_string(version)},
      {"build_time_ms", std::to_string(build_time_ms)},
  };
}

BuildConfig BuildConfig::from_params(const std::map<std::string, std::string>& params) {
  BuildConfig c;
  auto get = [&](const char* key) -> const std::string* {
    auto it = params.find(key);
    return it == params.end() || it->second.empty() ? nullptr : &it->second;
  };
  if (auto* v = get("priors")) c.priors = *v;
  if (auto* v = get("sample_count")) c.sample_count = std::stoull(*v);
  if (auto* v = get("seed")) c.seed = std::stoull(*v);
  if (auto* v = get("target_fpr")) c.target_fpr = std::stod(*v);
  if (auto* v = get("epochs")) c.epochs = uint32_t(std::stoul(*v));
  if (auto* v = get("learning_rate")) c.learning_rate = std::stod(*v);
  if (auto* v = get("l1")) c.l1 = std::stod(*v);
  if (auto* v = get("l2")) c.l2 = std::stod(*v);
  if (auto* v = get("knowledge_dropout")) c.knowledge_dropout = std::stod(*v);
  if (auto* v = get("hash_bits")) c.hash_bits = uint32_t(std::stoul(*v));
  if (auto* v = get("hash_seed")) c.hash_seed = std::stoull(*v);
  if (auto* v = get("rejection_threshold")) c.rejection_threshold = std::stod(*v);
  if (auto* v = get("slots_first")) c.slots_first = (*v == "true" || *v == "1");
  if (auto* v = get("version")) c.version = std::stoull(*v);
  if (auto* v = get("build_time_ms")) c.build_time_ms = std::stoull(*v);
  return c;
}

void BuildConfig::apply_json(std::string_view json_text) {
  json j = json::parse(json_text, nullptr, false);
  if (j.is_discarded() || !j.is_object())
    throw PipelineError("malformed build config JSON");
  std::map<std::string, std::string> params = to_params();
  for (const auto& [key, value] : j.items()) {
    if (!params.count(key)) throw PipelineError("unknown build config key: " + key);
    params[key] = value.is_string() ? value.get<std::string>() : value.dump();
  }
  *this = from_params(params);
}

std::string BuildConfig::canonical_json() const {
  json j;
  for (const auto& [k, v] : to_params()) {
    if (k == "build_time_ms" || k == "version") continue;  // volatile
    j[k] = v;
  }
  return j.dump();
}

std::string BuildConfig::digest() const { return sha256_hex(canonical_json()); }

TrainConfig BuildConfig::train_config() const {
  TrainConfig t;
  t.epochs = epochs;
  t.learning_rate = learning_rate;
  t.l1 = l1;
  t.l2 = l2;
  t.knowledge_dropout = knowledge_dropout;
  t.hash.bits = hash_bits;
  t.hash.seed = hash_seed;
  t.seed = seed;
  return t;
}

// --- corpus format -----------------------------------------------------------------

std::string corpus_line(const std::vector<std::string>& tokens,
                        const SemanticFrame& frame) {
  return join(tokens) + "\t" + frame.to_json();
}

std::pair<std::vector<std::string>, SemanticFrame> parse_corpus_line(
    std::string_view line) {
  size_t tab = line.find('\t');
  if (tab == std::string_view::npos)
    throw PipelineError("corpus line missing frame column");
  std::vector<std::string> tokens = tokenize(line.substr(0, tab));
  SemanticFrame frame = SemanticFrame::from_json(std::string(line.substr(tab + 1)));
  return {std::move(tokens), std::move(frame)};
}

// --- activities ----------------------------------------------------------------------

namespace {

InteractionModel model_of(const std::string& payload) {
  return model_from_json(payload);
}

std::vector<BloomFilter> gazetteers_of(const std::string& payload) {
  BinaryReader r(payload);
  uint32_t n = r.u32();
  std::vector<BloomFilter> out;
  for (uint32_t i = 0; i < n; ++i) out.push_back(BloomFilter::from_bytes(r.str()));
  return out;
}

std::string gazetteers_bytes(const std::vector<BloomFilter>& filters) {
  BinaryWriter w;
  w.u32(uint32_t(filters.size()));
  for (const auto& f : filters) w.str(f.to_bytes());
  return w.take();
}

struct Corpus {
  std::vector<std::vector<std::string>> tokens;
  std::vector<SemanticFrame> frames;
};

Corpus corpus_of(const std::string& payload) {
  Corpus c;
  std::istringstream in(payload);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto [tokens, frame] = parse_corpus_line(line);
    c.tokens.push_back(std::move(tokens));
    c.frames.push_back(std::move(frame));
  }
  return c;
}

void activity_validate_model(ActivityContext& ctx) {
  InteractionModel model = model_of(ctx.fetch(0));
  ValidationReport report = validate_interaction_model(model, BuiltinCatalog::bundled());
  if (!report.ok())
    throw PipelineError("interaction model failed validation:\n" + report.to_string());
  ctx.put(0, model_to_json(model));
}

void activity_build_grammar(ActivityContext& ctx) {
  InteractionModel model = model_of(ctx.fetch(0));
  PriorMode mode = ctx.param("priors", "uniform") == "empirical" ? PriorMode::Empirical
                                                                 : PriorMode::MaxEntropy;
  std::vector<std::string> warnings;
  WeightedGrammar g = build_grammar(model, BuiltinCatalog::bundled(), mode, &warnings);
  for (const auto& w : warnings) ctx.log(w);
  ctx.put(0, grammar_to_bytes(g));
}

void activity_build_gazetteers(ActivityContext& ctx) {
  InteractionModel model = model_of(ctx.fetch(0));
  double fpr = ctx.param_double("target_fpr", 0.01);
  std::vector<BloomFilter> filters;
  for (const auto& type : model.slot_types)
    filters.push_back(build_bloom_filter(type.name, type.values, fpr));
  // builtin types referenced by the schema join the gazetteer set too
  std::set<std::string> builtin_seen;
  for (const auto& intent : model.schema.intents)
    for (const auto& slot : intent.slots) {
      if (model.find_slot_type(slot.type)) continue;
      if (!builtin_seen.insert(slot.type).second) continue;
      if (const CustomSlotType* type = BuiltinCatalog::bundled().find(slot.type))
        filters.push_back(build_bloom_filter(type->name, type->values, fpr));
    }
  ctx.put(0, gazetteers_bytes(filters));
}

void activity_sample_corpus(ActivityContext& ctx) {
  WeightedGrammar g = grammar_from_bytes(ctx.fetch(0));
  uint64_t n = uint64_t(ctx.param_int("sample_count", 4000));
  uint64_t seed = uint64_t(ctx.param_int("seed", 42));
  auto samples = sample_utterances(g, size_t(n), seed);
  std::string out;
  for (const auto& s : samples) {
    out += corpus_line(s.tokens, s.frame);
    out += '\n';
  }
  ctx.put(0, out);
}

void activity_train_intent_model(ActivityContext& ctx) {
  Corpus corpus = corpus_of(ctx.fetch(0));
  std::vector<BloomFilter> gazetteers = gazetteers_of(ctx.fetch(1));
  InteractionModel model = model_of(ctx.fetch(2));
  BuildConfig config = BuildConfig::from_params({
      {"epochs", ctx.param("epochs")},
      {"learning_rate", ctx.param("learning_rate")},
      {"l1", ctx.param("l1")},
      {"l2", ctx.param("l2")},
      {"knowledge_dropout", ctx.param("knowledge_dropout")},
      {"hash_bits", ctx.param("hash_bits")},
      {"hash_seed", ctx.param("hash_seed")},
      {"seed", ctx.param("seed")},
  });

  std::vector<NamedExample> dataset;
  dataset.reserve(corpus.tokens.size());
  for (size_t i = 0; i < corpus.tokens.size(); ++i)
    dataset.push_back(
        {extract_intent_features(corpus.tokens[i], gazetteers), corpus.frames[i].intent});
  std::vector<std::string> labels;
  for (const auto& intent : model.schema.intents) labels.push_back(intent.name);

  MaxEntModel trained = train_maxent_named(dataset, config.train_config(), labels);
  ctx.put(0, quantize_model(trained).to_bytes());
}

void activity_train_slot_model(ActivityContext& ctx) {
  Corpus corpus = corpus_of(ctx.fetch(0));
  std::vector<BloomFilter> gazetteers = gazetteers_of(ctx.fetch(1));
  InteractionModel model = model_of(ctx.fetch(2));
  BuildConfig config = BuildConfig::from_params({
      {"epochs", ctx.param("epochs")},
      {"learning_rate", ctx.param("learning_rate")},
      {"l1", ctx.param("l1")},
      {"l2", ctx.param("l2")},
      {"knowledge_dropout", ctx.param("knowledge_dropout")},
      {"hash_bits", ctx.param("hash_bits")},
      {"hash_seed", ctx.param("hash_seed")},
      {"seed", ctx.param("seed")},
  });

  std::vector<NamedSequence> dataset;
  dataset.reserve(corpus.tokens.size());
  for (size_t i = 0; i < corpus.tokens.size(); ++i) {
    NamedSequence seq;
    for (size_t t = 0; t < corpus.tokens[i].size(); ++t)
      seq.features.push_back(extract_tagger_features(corpus.tokens[i], t, gazetteers));
    seq.labels = bio_tags_from_frame(corpus.frames[i], corpus.tokens[i].size());
    dataset.push_back(std::move(seq));
  }
  std::vector<std::string> slots;
  std::set<std::string> seen;
  for (const auto& intent : model.schema.intents)
    for (const auto& slot : intent.slots)
      if (seen.insert(slot.name).second) slots.push_back(slot.name);

  CrfModel trained = train_crf(dataset, config.train_config(), slots);
  ctx.put(0, quantize_model(trained).to_bytes());
}

void activity_assemble_bundle(ActivityContext& ctx) {
  SkillModelBundle bundle;
  bundle.model = model_of(ctx.fetch(0));
  bundle.grammar = grammar_from_bytes(ctx.fetch(1));
  bundle.gazetteers = gazetteers_of(ctx.fetch(2));
  bundle.intent_model = QuantizedMaxEnt::from_bytes(ctx.fetch(3));
  bundle.slot_model = QuantizedCrf::from_bytes(ctx.fetch(4));
  bundle.skill_id = ctx.param("skill_id", "skill");
  bundle.version = uint64_t(ctx.param_int("version", 0));
  bundle.nlu.rejection_threshold = ctx.param_double("rejection_threshold", 0.35);
  bundle.nlu.slots_first = ctx.param("slots_first", "false") == "true";
  uint64_t t = uint64_t(ctx.param_int("build_time_ms", 0));
  if (t == 0)
    t = uint64_t(std::chrono::duration_cast<std::chrono::milliseconds>(
                     std::chrono::system_clock::now().time_since_epoch())
                     .count());
  bundle.created_unix_ms = t;
  bundle.config_digest = ctx.param("config_digest", "");
  ctx.put(0, bundle_to_bytes(bundle));
}

// The canonical two-step classifier recipe: featurize a labeled text file,
// then fit the classifier. Data lines are `label TAB text`.
void activity_extract_features(ActivityContext& ctx) {
  std::istringstream in(ctx.fetch(0));
  std::string line;
  json out = json::array();
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    size_t tab = line.find('\t');
    if (tab == std::string::npos) throw PipelineError("data line missing label column");
    std::string label = line.substr(0, tab);
    FeatureSet features = extract_intent_features(tokenize(line.substr(tab + 1)), {});
    json fj = json::array();
    for (const auto& f : features) fj.push_back(json{{"n", f.name}, {"v", f.value}});
    out.push_back(json{{"label", label}, {"features", std::move(fj)}});
  }
  ctx.put(0, out.dump());
}

void activity_train_classifier(ActivityContext& ctx) {
  json j = json::parse(ctx.fetch(0));
  std::vector<NamedExample> dataset;
  for (const auto& ej : j) {
    NamedExample ex;
    ex.label = ej.value("label", std::string());
    for (const auto& fj : ej["features"])
      ex.features.push_back({fj.value("n", std::string()), fj.value("v", 1.0)});
    dataset.push_back(std::move(ex));
  }
  BuildConfig config = BuildConfig::from_params({
      {"epochs", ctx.param("epochs")},
      {"learning_rate", ctx.param("learning_rate")},
      {"seed", ctx.param("seed")},
  });
  MaxEntModel model = train_maxent_named(dataset, config.train_config());
  ctx.put(0, model.to_bytes());
}

}  // namespace

void register_build_activities(ActivityRegistry& registry) {
  if (registry.find("validate_model")) return;
  registry.add({"validate_model", 1, 1, "check an interaction model against its contract",
                activity_validate_model});
  registry.add({"build_grammar", 1, 1, "compile the model into a weighted token FST",
                activity_build_grammar});
  registry.add({"build_gazetteers", 1, 1, "bloom-filter word clusters from slot values",
                activity_build_gazetteers});
  registry.add({"sample_corpus", 1, 1, "draw labeled utterances from the grammar",
                activity_sample_corpus});
  registry.add({"train_intent_model", 3, 1, "fit + quantize the intent classifier",
                activity_train_intent_model});
  registry.add({"train_slot_model", 3, 1, "fit + quantize the slot tagger",
                activity_train_slot_model});
  registry.add({"assemble_bundle", 5, 1, "pack grammar, models and filters",
                activity_assemble_bundle});
  registry.add({"extract_features", 1, 1, "featurize labeled text lines",
                activity_extract_features});
  registry.add({"train_classifier", 1, 1, "fit a classifier from feature lines",
                activity_train_classifier});
}

ActivityRegistry& builtin_activities() {
  static ActivityRegistry* registry = [] {
    auto* r = new ActivityRegistry();
    register_build_activities(*r);
    return r;
  }();
  return *registry;
}

const std::vector<RecipeDAG>& builtin_recipes() {
  static const std::vector<RecipeDAG>* recipes = [] {
    auto* out = new std::vector<RecipeDAG>();

    RecipeBuilder bundle_recipe("build_skill_bundle");
    bundle_recipe.artifact("model_json");
    for (const auto& [k, v] : BuildConfig().to_params()) bundle_recipe.param(k, v);
    bundle_recipe.param("skill_id", "skill");
    bundle_recipe.param("config_digest", "");
    bundle_recipe.step("validate_model", {"model_json"}, {"validated_model"});
    bundle_recipe.step("build_grammar", {"validated_model"}, {"grammar_fst"});
    bundle_recipe.step("build_gazetteers", {"validated_model"}, {"gazetteers"});
    bundle_recipe.step("sample_corpus", {"grammar_fst"}, {"corpus"});
    bundle_recipe.step("train_intent_model", {"corpus", "gazetteers", "validated_model"},
                       {"intent_model"});
    bundle_recipe.step("train_slot_model", {"corpus", "gazetteers", "validated_model"},
                       {"slot_model"});
    bundle_recipe.step(
        "assemble_bundle",
        {"validated_model", "grammar_fst", "gazetteers", "intent_model", "slot_model"},
        {"bundle"});
    out->push_back(bundle_recipe.build(builtin_activities()));

    RecipeBuilder ic_recipe("build_ic_model");
    ic_recipe.artifact("data_file");
    ic_recipe.param("epochs", "12");
    ic_recipe.param("learning_rate", "0.25");
    ic_recipe.step("extract_features", {"data_file"}, {"features"});
    ic_recipe.step("train_classifier", {"features"}, {"model"});
    out->push_back(ic_recipe.build(builtin_activities()));

    return out;
  }();
  return *recipes;
}

const RecipeDAG* find_recipe(std::string_view name) {
  for (const auto& r : builtin_recipes())
    if (r.name == name) return &r;
  return nullptr;
}

BuildOutput build_skill_bundle(const InteractionModel& model, const std::string& skill_id,
                               const BuildConfig& config,
                               const ExecutorOptions& executor) {
  const RecipeDAG* recipe = find_recipe("build_skill_bundle");
  ArtifactIO io(std::filesystem::temp_directory_path() / "slu-build");
  io.put("mem:build_skill_bundle/model_json", model_to_json(model));

  RecipeDAG dag = *recipe;
  dag.artifact_uris["model_json"] = "mem:build_skill_bundle/model_json";
  std::map<std::string, std::string> params = config.to_params();
  params["skill_id"] = skill_id;
  params["config_digest"] = config.digest();

  BuildOutput out;
  out.report = execute(dag, builtin_activities(), io, executor, params);
  if (out.report.ok())
    out.bundle_bytes = io.fetch("mem:build_skill_bundle/bundle");
  return out;
}

}  // namespace slu
