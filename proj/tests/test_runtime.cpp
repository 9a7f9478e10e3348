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

#include <doctest.h>

#include <atomic>
#include <filesystem>
#include <thread>

#include "slu/builder.hpp"
#include "slu/dialogue.hpp"
#include "slu/eval.hpp"
#include "slu/io.hpp"
#include "slu/model_store.hpp"
#include "slu/nlu_engine.hpp"
#include "slu/rng.hpp"
#include "slu/text.hpp"

using namespace slu;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& tag) {
  fs::path dir = fs::temp_directory_path() /
                 ("slu-rt-" + tag + "-" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

BuildConfig fast_config() {
  BuildConfig config;
  config.sample_count = 600;
  config.epochs = 6;
  config.hash_bits = 14;
  config.seed = 13;
  return config;
}

// One taxi bundle shared by the statistical tests (built once).
const SkillModelBundle& taxi_bundle() {
  static const SkillModelBundle bundle = [] {
    ModelDir dir = load_model_dir(std::string(SLU_DATA_DIR) + "/skills/taxi");
    BuildOutput out = build_skill_bundle(dir.model, "taxi", fast_config(),
                                         ExecutorOptions::sequential());
    if (!out.report.ok())
      throw std::runtime_error("taxi build failed:\n" + out.report.summary());
    SkillModelBundle b = bundle_from_bytes(out.bundle_bytes);
    b.version = 1;
    return b;
  }();
  return bundle;
}

// Tiny structurally-valid bundle for store tests; `marker` varies content.
std::string tiny_bundle_bytes(const std::string& skill_id, const std::string& marker) {
  SkillModelBundle b;
  b.skill_id = skill_id;
  b.model.schema.intents.push_back({"Ping", {}, false, ""});
  LabeledUtterance u;
  u.intent = "Ping";
  u.tokens = {{TemplateToken::Kind::Literal, marker}};
  b.model.samples.push_back(u);
  b.model.invocation_name = "tiny " + marker;
  b.grammar = build_grammar(b.model, BuiltinCatalog::bundled());
  b.intent_model.labels = {"Ping"};
  b.intent_model.dimension = 4;
  b.intent_model.weights = quantize_rows(std::vector<double>(4, 0.0), 1, 4);
  b.slot_model.labels = BioLabels(std::vector<std::string>{});
  b.slot_model.dimension = 4;
  b.slot_model.emissions = quantize_rows(std::vector<double>(4, 0.0), 1, 4);
  b.slot_model.transitions = quantize_rows({0.0}, 1, 1);
  return bundle_to_bytes(b);
}

}  // namespace

TEST_CASE("bundle bytes round-trip with digest verification") {
  std::string bytes = tiny_bundle_bytes("t", "alpha");
  SkillModelBundle b = bundle_from_bytes(bytes);
  CHECK(b.skill_id == "t");
  CHECK(b.model.invocation_name == "tiny alpha");
  CHECK(bundle_info(bytes).invocation_name == "tiny alpha");

  SUBCASE("corruption is caught") {
    std::string bad = bytes;
    bad[bad.size() / 2] ^= 0x40;
    CHECK_THROWS_AS(bundle_from_bytes(bad), BundleError);
  }
  SUBCASE("truncation is caught, not crashed on") {
    for (size_t cut : {size_t(3), bytes.size() / 2, bytes.size() - 2})
      CHECK_THROWS_AS(bundle_from_bytes(std::string_view(bytes).substr(0, cut)),
                      BundleError);
  }
  SUBCASE("content digest ignores build metadata") {
    SkillModelBundle b1 = bundle_from_bytes(bytes);
    SkillModelBundle b2 = bundle_from_bytes(bytes);
    b2.created_unix_ms = b1.created_unix_ms + 12345;
    CHECK(b1.content_digest() == b2.content_digest());
    SkillModelBundle b3 = bundle_from_bytes(tiny_bundle_bytes("t", "beta"));
    CHECK(b1.content_digest() != b3.content_digest());
  }
}

TEST_CASE("model store versions, latest pointer and corruption guard") {
  ModelStore store(fresh_dir("store"));

  SUBCASE("latest wins, old versions retained") {
    store.store(tiny_bundle_bytes("greeter", "one"));
    store.store(tiny_bundle_bytes("greeter", "two"));
    CHECK(store.latest_version("greeter") == 2);
    CHECK(store.versions("greeter") == std::vector<uint64_t>{1, 2});
    CHECK(bundle_info(store.load_bytes("greeter")).invocation_name == "tiny two");
    CHECK(bundle_info(store.load_bytes("greeter", 1)).invocation_name == "tiny one");
  }

  SUBCASE("unknown skill and version raise") {
    CHECK_THROWS_AS(store.load("nobody"), StoreError);
    store.store(tiny_bundle_bytes("greeter", "one"));
    CHECK_THROWS_AS(store.load("greeter", 9), StoreError);
  }

  SUBCASE("a truncated bundle file fails its digest, not the process") {
    uint64_t v = store.store(tiny_bundle_bytes("greeter", "one"));
    fs::path file = store.root() / "greeter" / std::to_string(v) / "bundle.bin";
    std::string bytes = read_file(file);
    write_file_atomic(file, std::string_view(bytes).substr(0, bytes.size() / 2));
    CHECK_THROWS_AS(store.load("greeter"), BundleError);
  }

  SUBCASE("invocation-name routing is an exact-match lookup") {
    store.store(tiny_bundle_bytes("greeter", "hello"));
    store.store(tiny_bundle_bytes("other", "goodbye"));
    CHECK(store.find_by_invocation("tiny hello") == std::string("greeter"));
    CHECK(store.find_by_invocation("Tiny  Hello") == std::string("greeter"));
    CHECK_FALSE(store.find_by_invocation("tiny").has_value());
  }
}

TEST_CASE("polling readers never observe a partial bundle") {
  ModelStore store(fresh_dir("atomic"));
  store.store(tiny_bundle_bytes("skill", "v0"));

  std::atomic<bool> done{false};
  std::atomic<int> reads{0};
  std::atomic<int> failures{0};
  std::thread reader([&] {
    while (!done) {
      try {
        SkillModelBundle b = store.load("skill");  // digest-verified read
        ++reads;
        if (b.skill_id != "skill") ++failures;
      } catch (const std::exception&) {
        ++failures;
      }
    }
  });
  for (int i = 1; i <= 50; ++i)
    store.store(tiny_bundle_bytes("skill", "v" + std::to_string(i)));
  done = true;
  reader.join();
  CHECK(failures == 0);
  CHECK(reads > 0);
}

TEST_CASE("understand: deterministic first, statistical fallback, OOD floor") {
  NluEngine engine(taxi_bundle());

  SUBCASE("in-grammar utterances take the deterministic path with confidence 1") {
    NLUResult r = engine.understand("get me a cab to portland");
    REQUIRE(r.frame.has_value());
    CHECK(r.diagnostics.path == "deterministic");
    CHECK(r.frame->confidence == 1.0);
    CHECK(r.frame->source == FrameSource::Deterministic);
    CHECK(r.frame->intent == "BookRide");
    CHECK(r.frame->slots.at("Destination").value == "portland");
  }

  SUBCASE("every grammar path resolves deterministically (hybrid precedence)") {
    for (const auto& p : enumerate_paths(taxi_bundle().grammar, 100000)) {
      NLUResult r = engine.understand_tokens(p.tokens);
      REQUIRE(r.frame.has_value());
      CHECK(r.diagnostics.path == "deterministic");
      CHECK(r.frame->same_parse(p.frame));
    }
  }

  SUBCASE("paraphrases fall through to the statistical path") {
    NLUResult r = engine.understand("i need a cab going to portland now");
    REQUIRE(r.frame.has_value());
    CHECK(r.diagnostics.path == "statistical");
    CHECK(r.frame->source == FrameSource::Statistical);
    CHECK(r.frame->intent == "BookRide");
    CHECK(r.frame->confidence > 0.0);
    CHECK_FALSE(r.diagnostics.intent_posteriors.empty());
  }

  SUBCASE("empty input is out of domain, no crash") {
    NLUResult r = engine.understand("");
    CHECK(r.out_of_domain);
    CHECK_FALSE(r.frame.has_value());
    CHECK(r.diagnostics.path == "out_of_domain");
    CHECK(engine.understand("    ???   ").out_of_domain);
  }

  SUBCASE("rejection threshold gates the statistical path") {
    SkillModelBundle strict = taxi_bundle();
    strict.nlu.rejection_threshold = 1.01;  // nothing can pass
    NluEngine gated(strict);
    NLUResult r = gated.understand("mumble mumble weather");
    CHECK(r.out_of_domain);
    // deterministic coverage is unaffected by the gate
    CHECK(gated.understand("cancel my ride").diagnostics.path == "deterministic");
  }

  SUBCASE("slots-first cascade order is configurable and still answers") {
    SkillModelBundle flipped = taxi_bundle();
    flipped.nlu.slots_first = true;
    NluEngine engine2(flipped);
    NLUResult r = engine2.understand("i need a cab going to portland now");
    REQUIRE(r.frame.has_value());
    CHECK(r.diagnostics.path == "statistical");
  }
}

TEST_CASE("bundle component checks") {
  SkillModelBundle broken = taxi_bundle();
  broken.intent_model.labels.clear();
  CHECK_THROWS_AS(NluEngine{broken}, BundleError);
}

TEST_CASE("dialogue elicits missing slots in order, confirms, then fulfills") {
  const SkillModelBundle& bundle = taxi_bundle();

  SemanticFrame frame;
  frame.intent = "BookRide";
  frame.confidence = 1.0;

  auto [s1, d1] = dialogue_step(bundle, DialogueState{}, DialogueInput(frame));
  CHECK(d1.kind == DialogueDirective::Kind::ElicitSlot);
  CHECK(d1.slot == "Destination");
  CHECK(d1.prompt == "Where do you want to go?");
  CHECK(s1.phase == DialoguePhase::Eliciting);

  auto [s2, d2] = dialogue_step(bundle, s1, DialogueInput(std::string("portland")));
  CHECK(d2.kind == DialogueDirective::Kind::ElicitSlot);
  CHECK(d2.slot == "When");
  CHECK(s2.pending.slots.at("Destination").value == "portland");

  auto [s3, d3] = dialogue_step(bundle, s2, DialogueInput(std::string("tomorrow")));
  CHECK(d3.kind == DialogueDirective::Kind::ConfirmIntent);
  CHECK(d3.prompt == "You want a ride to portland, right?");
  CHECK(s3.phase == DialoguePhase::Confirming);

  auto [s4, d4] = dialogue_step(bundle, s3, DialogueInput(std::string("yes")));
  CHECK(d4.kind == DialogueDirective::Kind::Fulfill);
  CHECK(s4.phase == DialoguePhase::Fulfilled);
  CHECK(d4.frame.slots.at("Destination").value == "portland");
  CHECK(d4.frame.slots.at("When").value == "tomorrow");
  CHECK(s4.steps <= s4.step_budget);
}

TEST_CASE("dialogue edge behavior") {
  const SkillModelBundle& bundle = taxi_bundle();

  SUBCASE("a frame with everything filled and no confirmation fulfills at once") {
    SemanticFrame frame;
    frame.intent = "CancelRide";
    auto [state, directive] = dialogue_step(bundle, DialogueState{}, DialogueInput(frame));
    CHECK(directive.kind == DialogueDirective::Kind::Fulfill);
    CHECK(state.phase == DialoguePhase::Fulfilled);
  }

  SUBCASE("slot answers are re-recognized against the slot grammar") {
    SemanticFrame frame;
    frame.intent = "BookRide";
    auto [s1, d1] = dialogue_step(bundle, DialogueState{}, DialogueInput(frame));
    // "PORTLAND!!" normalizes into the value list
    auto [s2, d2] = dialogue_step(bundle, s1, DialogueInput(std::string(" PORTLAND!! ")));
    CHECK(d2.slot == "When");
    CHECK(s2.pending.slots.at("Destination").value == "portland");
  }

  SUBCASE("three failed answers escalate with a full prompt") {
    SemanticFrame frame;
    frame.intent = "BookRide";
    auto [state, d0] = dialogue_step(bundle, DialogueState{}, DialogueInput(frame));
    DialogueDirective last = d0;
    for (int i = 0; i < 3; ++i) {
      auto [next, d] = dialogue_step(bundle, state, DialogueInput(std::string("xyzzy")));
      state = next;
      last = d;
    }
    CHECK(state.phase == DialoguePhase::Escalated);
    CHECK(last.kind == DialogueDirective::Kind::ElicitSlot);
    CHECK(last.prompt.find("For example") != std::string::npos);
  }

  SUBCASE("denied confirmation restarts elicitation once, then escalates") {
    SemanticFrame frame;
    frame.intent = "BookRide";
    frame.slots["Destination"] = {"boston", 0, 0};
    frame.slots["When"] = {"today", 0, 0};
    auto [s1, d1] = dialogue_step(bundle, DialogueState{}, DialogueInput(frame));
    CHECK(d1.kind == DialogueDirective::Kind::ConfirmIntent);
    auto [s2, d2] = dialogue_step(bundle, s1, DialogueInput(std::string("no")));
    CHECK(d2.kind == DialogueDirective::Kind::ElicitSlot);
    CHECK(d2.slot == "Destination");
    CHECK(s2.phase == DialoguePhase::Eliciting);
    CHECK(s2.pending.slots.count("Destination") == 0);  // cleared for re-elicitation

    auto [s3, d3] = dialogue_step(bundle, s2, DialogueInput(std::string("denver")));
    auto [s4, d4] = dialogue_step(bundle, s3, DialogueInput(std::string("friday")));
    CHECK(d4.kind == DialogueDirective::Kind::ConfirmIntent);
    auto [s5, d5] = dialogue_step(bundle, s4, DialogueInput(std::string("no")));
    CHECK(s5.phase == DialoguePhase::Escalated);
    (void)d5;
  }
}

TEST_CASE("dialogue terminates within the step budget on random transcripts") {
  const SkillModelBundle& bundle = taxi_bundle();
  const CustomSlotType* cities = bundle.model.find_slot_type("CITY_NAMES");
  const CustomSlotType* dates = BuiltinCatalog::bundled().find("AMAZON.DATE");
  REQUIRE(cities);
  REQUIRE(dates);

  Rng rng(31337);
  for (int trial = 0; trial < 200; ++trial) {
    SemanticFrame frame;
    frame.intent = "BookRide";
    if (rng.below(2)) frame.slots["Destination"] = {cities->values[0], 0, 0};
    if (rng.below(2)) frame.slots["When"] = {dates->values[0], 0, 0};

    auto [state, directive] = dialogue_step(bundle, DialogueState{}, DialogueInput(frame));
    size_t calls = 1;
    while (!state.terminal()) {
      REQUIRE(calls <= state.step_budget);
      std::string answer;
      if (directive.kind == DialogueDirective::Kind::ConfirmIntent) {
        answer = rng.below(4) ? "yes" : "no";
      } else {
        REQUIRE(directive.kind == DialogueDirective::Kind::ElicitSlot);
        // the directive must name a declared slot of the pending intent
        const IntentDecl* intent = bundle.model.schema.find_intent("BookRide");
        REQUIRE(intent->find_slot(directive.slot) != nullptr);
        switch (rng.below(3)) {
          case 0:
            answer = directive.slot == "Destination"
                         ? cities->values[rng.below(cities->values.size())]
                         : dates->values[rng.below(dates->values.size())];
            break;
          case 1:
            answer = "gibberish answer";
            break;
          default:
            answer = directive.slot == "Destination" ? cities->values[0]
                                                     : dates->values[0];
        }
      }
      auto [next, d] = dialogue_step(bundle, state, DialogueInput(answer));
      state = next;
      directive = d;
      ++calls;
    }
    CHECK(calls <= state.step_budget);
    if (state.phase == DialoguePhase::Fulfilled) {
      // fulfilled implies nothing left to ask
      CHECK(state.missing.empty());
    }
  }
}

TEST_CASE("eval on enumerated grammar paths scores perfectly") {
  NluEngine engine(taxi_bundle());
  std::vector<EvalExample> examples;
  for (const auto& p : enumerate_paths(taxi_bundle().grammar, 100000))
    examples.push_back({p.tokens, p.frame});
  EvalMetrics m = evaluate(engine, examples);
  CHECK(m.intent_accuracy == 1.0);
  CHECK(m.slot_f1 == 1.0);
  CHECK(m.coverage_rate == 1.0);
}

TEST_CASE("eval file parsing reports bad lines and keeps going") {
  std::string text =
      "get me a cab\t{\"intent\": \"BookRide\", \"slots\": {}}\n"
      "not json at all\tgarbage\n"
      "\n"
      "{\"text\": \"cancel my ride\", \"intent\": \"CancelRide\"}\n";
  std::vector<EvalParseIssue> issues;
  auto examples = parse_eval_file(text, &issues);
  CHECK(examples.size() == 2);
  REQUIRE(issues.size() == 1);
  CHECK(issues[0].line == 2);
}
