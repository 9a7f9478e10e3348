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
#include <chrono>
#include <filesystem>
#include <thread>

#include <json.hpp>

#include "slu/builder.hpp"
#include "slu/hashing.hpp"
#include "slu/pipeline.hpp"
#include "slu/rng.hpp"

using namespace slu;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& tag) {
  fs::path dir = fs::temp_directory_path() /
                 ("slu-test-" + tag + "-" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// Deterministic toy activities for executor tests.
ActivityRegistry toy_registry() {
  ActivityRegistry registry;
  registry.add({"emit", 0, 1, "constant output", [](ActivityContext& ctx) {
                  ctx.put(0, "seed:" + ctx.param("value", "v"));
                }});
  registry.add({"combine", 2, 1, "hash of both inputs", [](ActivityContext& ctx) {
                  ctx.put(0, sha256_hex(ctx.fetch(0) + "|" + ctx.fetch(1)));
                }});
  registry.add({"derive", 1, 1, "hash of the input", [](ActivityContext& ctx) {
                  ctx.put(0, sha256_hex(ctx.fetch(0)));
                }});
  registry.add({"sleep_emit", 0, 1, "sleep then emit", [](ActivityContext& ctx) {
                  std::this_thread::sleep_for(std::chrono::milliseconds(
                      ctx.param_int("sleep_ms", 100)));
                  ctx.put(0, "slept");
                }});
  return registry;
}

}  // namespace

TEST_CASE("artifact io covers mem, file and kv backends") {
  fs::path root = fresh_dir("io");
  ArtifactIO io(root);

  for (const std::string uri : {"mem:a", "kv:some/key", "file:sub/f.bin", "plain.txt"}) {
    CHECK_FALSE(io.exists(uri));
    io.put(uri, "payload-" + uri);
    CHECK(io.exists(uri));
    CHECK(io.fetch(uri) == "payload-" + uri);
    CHECK(io.digest(uri) == sha256_hex("payload-" + uri));
  }
  CHECK_THROWS_AS(io.fetch("mem:nope"), PipelineError);
  CHECK_THROWS_AS(io.fetch("kv:nope"), PipelineError);
  CHECK_THROWS_AS(io.fetch("file:nope"), PipelineError);

  // kv escapes awkward keys
  KvStore kv(root / "kv2");
  kv.put("weird key/with:stuff", "v");
  CHECK(kv.exists("weird key/with:stuff"));
  CHECK(kv.get("weird key/with:stuff") == "v");
}

TEST_CASE("the canonical classifier recipe captures as a 2-node chain") {
  const RecipeDAG* dag = find_recipe("build_ic_model");
  REQUIRE(dag);
  REQUIRE(dag->nodes.size() == 2);
  CHECK(dag->nodes[0].activity == "extract_features");
  CHECK(dag->nodes[1].activity == "train_classifier");
  CHECK(dag->source_artifacts() == std::vector<std::string>{"data_file"});
  CHECK(dag->outputs == std::vector<std::string>{"model"});
}

TEST_CASE("an empty recipe is a valid no-op") {
  RecipeDAG dag = RecipeBuilder("noop").build(toy_registry());
  CHECK(dag.nodes.empty());
  ArtifactIO io(fresh_dir("noop"));
  RunReport report = execute(dag, toy_registry(), io, ExecutorOptions::sequential());
  CHECK(report.ok());
  CHECK(report.activities.empty());
}

TEST_CASE("recipe validation rejects structural defects") {
  ActivityRegistry registry = toy_registry();

  SUBCASE("cycle through two nodes") {
    RecipeBuilder b("cyclic");
    b.step("derive", {"x"}, {"y"});
    b.step("derive", {"y"}, {"x"});
    CHECK_THROWS_WITH_AS(b.build(registry), doctest::Contains("cycle"), PipelineError);
  }

  SUBCASE("self cycle") {
    RecipeBuilder b("selfcycle");
    b.step("derive", {"x"}, {"x"});
    CHECK_THROWS_WITH_AS(b.build(registry), doctest::Contains("cycle"), PipelineError);
  }

  SUBCASE("two producers for one artifact") {
    RecipeBuilder b("dup");
    b.step("emit", {}, {"x"});
    b.step("emit", {}, {"x"});
    CHECK_THROWS_WITH_AS(b.build(registry), doctest::Contains("two producers"),
                         PipelineError);
  }

  SUBCASE("unregistered activity") {
    RecipeBuilder b("ghost");
    b.step("no_such_activity", {}, {"x"});
    CHECK_THROWS_WITH_AS(b.build(registry), doctest::Contains("no_such_activity"),
                         PipelineError);
  }

  SUBCASE("arity mismatch") {
    RecipeBuilder b("arity");
    b.step("combine", {"only_one"}, {"out"});
    CHECK_THROWS_AS(b.build(registry), PipelineError);
  }
}

TEST_CASE("dag serialization round-trips and validates on load") {
  const RecipeDAG* dag = find_recipe("build_ic_model");
  std::string text = serialize_dag(*dag);
  RecipeDAG loaded = deserialize_dag(text, builtin_activities());
  CHECK(loaded.structurally_equal(*dag));

  SUBCASE("unknown activity named in the error") {
    std::string bad = text;
    size_t pos = bad.find("extract_features");
    bad.replace(pos, std::string("extract_features").size(), "mystery_activity");
    CHECK_THROWS_WITH_AS(deserialize_dag(bad, builtin_activities()),
                         doctest::Contains("mystery_activity"), PipelineError);
  }

  SUBCASE("schema version mismatch") {
    nlohmann::json j = nlohmann::json::parse(text);
    j["schema_version"] = 99;
    CHECK_THROWS_WITH_AS(deserialize_dag(j.dump(), builtin_activities()),
                         doctest::Contains("version"), PipelineError);
  }
}

TEST_CASE("100 random DAGs round-trip with structural equality") {
  ActivityRegistry registry = toy_registry();
  Rng rng(404);
  for (int trial = 0; trial < 100; ++trial) {
    RecipeBuilder b("random" + std::to_string(trial));
    size_t n_layers = 1 + rng.below(4);
    std::vector<std::string> prev;
    size_t counter = 0;
    for (size_t layer = 0; layer < n_layers; ++layer) {
      size_t width = 1 + rng.below(3);
      std::vector<std::string> current;
      for (size_t w = 0; w < width; ++w) {
        std::string out = "a" + std::to_string(counter++);
        if (prev.size() >= 2 && rng.below(2)) {
          b.step("combine", {prev[rng.below(prev.size())],
                             prev[rng.below(prev.size())]}, {out});
        } else if (!prev.empty() && rng.below(2)) {
          b.step("derive", {prev[rng.below(prev.size())]}, {out});
        } else {
          b.step("emit", {}, {out});
        }
        current.push_back(out);
      }
      prev = current;
    }
    if (rng.below(2)) b.param("p" + std::to_string(trial), "x");
    RecipeDAG dag = b.build(registry);
    RecipeDAG loaded = deserialize_dag(serialize_dag(dag, rng.below(2) == 0), registry);
    CHECK(loaded.structurally_equal(dag));
  }
}

TEST_CASE("diamond DAG executes in dependency order, d strictly last") {
  ActivityRegistry registry = toy_registry();
  RecipeBuilder b("diamond");
  b.step("emit", {}, {"a"});
  b.step("derive", {"a"}, {"left"});
  b.step("derive", {"a"}, {"right"});
  b.step("combine", {"left", "right"}, {"d"});
  RecipeDAG dag = b.build(registry);

  std::vector<std::string> started;
  ExecutorOptions options;
  options.log_sink = [&](const std::string& line) {
    auto j = nlohmann::json::parse(line);
    if (j["event"] == "started") started.push_back(j["node"].get<std::string>());
  };
  ArtifactIO io(fresh_dir("diamond"));
  RunReport report = execute(dag, registry, io, options);
  REQUIRE(report.ok());
  REQUIRE(started.size() == 4);
  CHECK(started.front() == "0:emit");
  CHECK(started.back() == "3:combine");
  CHECK(io.exists("mem:diamond/d"));
}

TEST_CASE("failed activities retry per policy, then dependents skip") {
  ActivityRegistry registry = toy_registry();
  static std::atomic<int> attempts{0};
  attempts = 0;
  registry.add({"flaky", 0, 1, "fails twice then succeeds", [](ActivityContext& ctx) {
                  if (attempts.fetch_add(1) < 2) throw PipelineError("transient");
                  ctx.put(0, "finally");
                }});
  registry.add({"always_fails", 0, 1, "", [](ActivityContext&) {
                  throw PipelineError("permanent");
                }});

  SUBCASE("retries exhaust the failure and downstream runs") {
    RecipeBuilder b("flaky_chain");
    b.step("flaky", {}, {"x"});
    b.step("derive", {"x"}, {"y"});
    RecipeDAG dag = b.build(registry);
    ArtifactIO io(fresh_dir("flaky"));
    ExecutorOptions options;
    options.max_retries = 2;
    RunReport report = execute(dag, registry, io, options);
    CHECK(report.ok());
    CHECK(report.activities[0].retries == 2);
    CHECK(report.activities[1].status == ActivityStatus::Success);
  }

  SUBCASE("permanent failure skips all transitive dependents") {
    RecipeBuilder b("doomed");
    b.step("always_fails", {}, {"x"});
    b.step("derive", {"x"}, {"y"});
    b.step("derive", {"y"}, {"z"});
    RecipeDAG dag = b.build(registry);
    ArtifactIO io(fresh_dir("doomed"));
    ExecutorOptions options;
    options.max_retries = 1;
    RunReport report = execute(dag, registry, io, options);
    CHECK_FALSE(report.ok());
    CHECK(report.activities[0].status == ActivityStatus::Failed);
    CHECK(report.activities[0].retries == 1);
    CHECK(report.activities[0].error == "permanent");
    CHECK(report.activities[1].status == ActivityStatus::Skipped);
    CHECK(report.activities[2].status == ActivityStatus::Skipped);
    CHECK(report.activities[1].error.find("dependency failed") != std::string::npos);
  }
}

TEST_CASE("missing source artifacts abort before any activity runs") {
  ActivityRegistry registry = toy_registry();
  RecipeBuilder b("needs_input");
  b.step("derive", {"missing_input"}, {"out"});
  RecipeDAG dag = b.build(registry);
  ArtifactIO io(fresh_dir("missing"));
  CHECK_THROWS_WITH_AS(execute(dag, registry, io, ExecutorOptions::sequential()),
                       doctest::Contains("missing_input"), PipelineError);
}

TEST_CASE("an activity that does not produce its outputs fails") {
  ActivityRegistry registry = toy_registry();
  registry.add({"lazy", 0, 1, "", [](ActivityContext&) {}});
  RecipeBuilder b("lazy_recipe");
  b.step("lazy", {}, {"never"});
  RecipeDAG dag = b.build(registry);
  ArtifactIO io(fresh_dir("lazy"));
  RunReport report = execute(dag, registry, io, ExecutorOptions::sequential());
  CHECK_FALSE(report.ok());
  CHECK(report.activities[0].error.find("did not produce") != std::string::npos);
}

TEST_CASE("cancellation marks pending work skipped and reports partially") {
  ActivityRegistry registry = toy_registry();
  std::atomic<bool> cancel{false};
  registry.add({"emit_and_cancel", 0, 1, "", [&cancel](ActivityContext& ctx) {
                  ctx.put(0, "done");
                  cancel = true;
                }});
  RecipeBuilder b("cancelled");
  b.step("emit_and_cancel", {}, {"x"});
  b.step("derive", {"x"}, {"y"});
  RecipeDAG dag = b.build(registry);
  ArtifactIO io(fresh_dir("cancel"));
  ExecutorOptions options;
  options.cancel = &cancel;
  RunReport report = execute(dag, registry, io, options);
  CHECK_FALSE(report.ok());
  CHECK(report.activities[0].status == ActivityStatus::Success);
  CHECK(report.activities[1].status == ActivityStatus::Skipped);
  CHECK(report.activities[1].error == "cancelled");
}

TEST_CASE("parallel and sequential executors produce identical sink artifacts") {
  ActivityRegistry registry = toy_registry();
  Rng rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    RecipeBuilder b("equiv" + std::to_string(trial));
    std::vector<std::string> artifacts;
    size_t counter = 0;
    for (size_t i = 0; i < 6; ++i) {
      std::string out = "e" + std::to_string(counter++);
      if (artifacts.size() >= 2 && rng.below(2)) {
        b.step("combine",
               {artifacts[rng.below(artifacts.size())],
                artifacts[rng.below(artifacts.size())]},
               {out});
      } else if (!artifacts.empty() && rng.below(2)) {
        b.step("derive", {artifacts[rng.below(artifacts.size())]}, {out});
      } else {
        b.step("emit", {}, {out});
      }
      artifacts.push_back(out);
    }
    RecipeDAG dag = b.build(registry);

    ArtifactIO io_seq(fresh_dir("eq-seq"));
    ArtifactIO io_par(fresh_dir("eq-par"));
    RunReport seq = execute(dag, registry, io_seq, ExecutorOptions::sequential());
    RunReport par = execute(dag, registry, io_par, ExecutorOptions::parallel(4));
    REQUIRE(seq.ok());
    REQUIRE(par.ok());
    for (const auto& sink : dag.outputs) {
      std::string uri = "mem:" + dag.name + "/" + sink;
      CHECK(io_seq.fetch(uri) == io_par.fetch(uri));
    }
  }
}

TEST_CASE("parallel executor overlaps independent activities") {
  ActivityRegistry registry = toy_registry();
  RecipeBuilder b("sleepy");
  for (int i = 0; i < 4; ++i)
    b.step("sleep_emit", {}, {"s" + std::to_string(i)});
  b.param("sleep_ms", "150");
  RecipeDAG dag = b.build(registry);

  ArtifactIO io1(fresh_dir("sleep-seq"));
  RunReport seq = execute(dag, registry, io1, ExecutorOptions::sequential());
  ArtifactIO io2(fresh_dir("sleep-par"));
  RunReport par = execute(dag, registry, io2, ExecutorOptions::parallel(4));
  REQUIRE(seq.ok());
  REQUIRE(par.ok());
  CHECK(par.total_wall_ms <= 0.6 * seq.total_wall_ms);
}

TEST_CASE("crashing activities never corrupt other artifacts") {
  ActivityRegistry registry = toy_registry();
  registry.add({"writes_then_throws", 1, 1, "", [](ActivityContext& ctx) {
                  ctx.put(0, "half-finished");
                  throw PipelineError("boom");
                }});
  RecipeBuilder b("contain");
  b.step("emit", {}, {"good"});
  b.step("writes_then_throws", {"good"}, {"bad"});
  RecipeDAG dag = b.build(registry);
  fs::path root = fresh_dir("contain");
  ArtifactIO io(root);
  RecipeDAG bound = dag;
  bound.artifact_uris["good"] = "file:good.bin";
  bound.artifact_uris["bad"] = "file:bad.bin";
  ExecutorOptions options;
  options.max_retries = 3;
  RunReport report = execute(bound, registry, io, options);
  CHECK_FALSE(report.ok());
  // the good artifact is whole; no temp debris leaks into its content
  CHECK(io.fetch("file:good.bin") == "seed:v");
  for (const auto& entry : fs::directory_iterator(root))
    CHECK(entry.path().filename().string().find(".tmp.") == std::string::npos);
}

TEST_CASE("generate_cli derives one flag per parameter and source artifact") {
  const RecipeDAG* ic = find_recipe("build_ic_model");
  CommandSpec spec = generate_cli(*ic);
  CHECK(spec.name == "build-ic-model");
  auto has_flag = [&](const std::string& f) {
    return std::any_of(spec.flags.begin(), spec.flags.end(),
                       [&](const CliFlag& c) { return c.flag == f; });
  };
  CHECK(has_flag("--data-file"));
  CHECK(has_flag("--epochs"));
  CHECK(has_flag("--learning-rate"));
  CHECK(has_flag("--executor"));

  SUBCASE("zero-parameter recipe still gets --executor") {
    RecipeDAG noop = RecipeBuilder("noop").build(toy_registry());
    CommandSpec s = generate_cli(noop);
    REQUIRE(s.flags.size() == 1);
    CHECK(s.flags[0].flag == "--executor");
  }

  SUBCASE("reserved parameter names are rejected") {
    RecipeBuilder b("clash");
    b.param("executor", "");
    CHECK_THROWS_WITH_AS(generate_cli(b.build(toy_registry())),
                         doctest::Contains("reserved"), PipelineError);
  }
}

TEST_CASE("executor options parse the CLI surface") {
  CHECK(ExecutorOptions::parse("local").kind == ExecutorOptions::Kind::Sequential);
  CHECK(ExecutorOptions::parse("parallel").kind == ExecutorOptions::Kind::Parallel);
  CHECK(ExecutorOptions::parse("parallel:7").max_workers == 7);
  CHECK_THROWS_AS(ExecutorOptions::parse("cluster"), PipelineError);
}
