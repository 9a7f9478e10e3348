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

#include "slu/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "slu/builder.hpp"
#include "slu/dialogue.hpp"
#include "slu/eval.hpp"
#include "slu/grammar.hpp"
#include "slu/io.hpp"
#include "slu/model_store.hpp"
#include "slu/nlu_engine.hpp"
#include "slu/pipeline.hpp"
#include "slu/text.hpp"

namespace slu {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct GlobalOpts {
  std::string store_dir;
  std::string executor = "local";
  uint64_t seed = 0;  // 0: keep config default
  std::string config_file;

  fs::path store_path() const {
    if (!store_dir.empty()) return store_dir;
    if (const char* env = std::getenv("SLU_MODEL_STORE")) return env;
    return "model-store";
  }

  BuildConfig build_config() const {
    BuildConfig config;
    if (!config_file.empty()) config.apply_json(read_file(config_file));
    if (seed != 0) config.seed = seed;
    return config;
  }
};

int cmd_build(const GlobalOpts& global, const std::string& model_dir,
              const std::string& skill_id_flag, const std::string& priors,
              std::ostream& out, std::ostream& err) {
  ModelDir loaded = load_model_dir(model_dir);
  std::string skill_id = skill_id_flag.empty() ? loaded.skill_id : skill_id_flag;

  ValidationReport report =
      validate_interaction_model(loaded.model, BuiltinCatalog::bundled());
  if (!report.ok()) {
    err << "interaction model failed validation:\n" << report.to_string();
    return kExitUsage;
  }

  BuildConfig config = global.build_config();
  if (!priors.empty()) config.priors = priors;

  BuildOutput result = build_skill_bundle(loaded.model, skill_id, config,
                                          ExecutorOptions::parse(global.executor));
  out << result.report.summary();
  if (!result.report.ok()) {
    err << "build failed\n";
    return kExitInternal;
  }

  ModelStore store(global.store_path());
  uint64_t version = store.store(result.bundle_bytes,
                                 config.version ? std::optional(config.version)
                                                : std::nullopt);
  BundleInfo info = bundle_info(store.load_bytes(skill_id, version));
  out << "stored " << skill_id << " v" << version << " (" << result.bundle_bytes.size()
      << " bytes, content " << info.content_digest.substr(0, 12) << ")\n";
  return kExitOk;
}

void print_hint(const SkillModelBundle& bundle, const std::string& args, std::ostream& out) {
  std::istringstream in(args);
  std::string slot_name, prefix;
  in >> slot_name >> prefix;
  for (const auto& intent : bundle.model.schema.intents) {
    const SlotDecl* slot = intent.find_slot(slot_name);
    if (!slot) continue;
    const CustomSlotType* type =
        resolve_slot_type(bundle.model, BuiltinCatalog::bundled(), slot->type);
    if (!type) continue;
    size_t shown = 0;
    for (const auto& v : type->values) {
      if (!prefix.empty() && !v.starts_with(prefix)) continue;
      out << "  " << v << "\n";
      if (++shown >= 10) break;
    }
    return;
  }
  out << "unknown slot: " << slot_name << "\n";
}

int cmd_console(const GlobalOpts& global, const std::string& skill_id, std::istream& in,
                std::ostream& out, std::ostream& err) {
  ModelStore store(global.store_path());
  SkillModelBundle bundle;
  try {
    bundle = store.load(skill_id);
  } catch (const std::exception& e) {
    err << e.what() << "\n";
    return kExitUsage;
  }
  auto engine = std::make_unique<NluEngine>(std::move(bundle));
  out << "console: " << skill_id << " v" << engine->bundle().version
      << " (:quit to exit, :reload to reload, :hint <slot> [prefix])\n";

  std::optional<DialogueState> dialogue;
  std::string line;
  while (out << "> " << std::flush, std::getline(in, line)) {
    if (line == ":quit") break;
    if (line == ":reload") {
      engine = std::make_unique<NluEngine>(store.load(skill_id));
      dialogue.reset();
      out << "reloaded " << skill_id << " v" << engine->bundle().version << "\n";
      continue;
    }
    if (line.starts_with(":hint")) {
      print_hint(engine->bundle(), line.substr(5), out);
      continue;
    }
    if (line.empty()) continue;

    if (dialogue && !dialogue->terminal()) {
      auto [next, directive] =
          dialogue_step(engine->bundle(), *dialogue, DialogueInput(line));
      dialogue = next;
      out << directive.to_json() << "\n";
      if (dialogue->terminal()) dialogue.reset();
      continue;
    }

    NLUResult result = engine->understand(line);
    out << result.to_json() << "\n";
    if (result.frame) {
      auto [state, directive] =
          dialogue_step(engine->bundle(), DialogueState{}, DialogueInput(*result.frame));
      if (directive.kind != DialogueDirective::Kind::Fulfill) {
        dialogue = state;
        out << directive.to_json() << "\n";
      }
    }
  }
  return kExitOk;
}

int cmd_sample(const GlobalOpts& global, const std::string& skill_id,
               const std::string& model_dir, uint64_t n, uint64_t seed,
               const std::string& format, std::ostream& out, std::ostream& err) {
  if (n == 0) {
    err << "sample count must be >= 1\n";
    return kExitUsage;
  }
  WeightedGrammar grammar;
  if (!model_dir.empty()) {
    ModelDir loaded = load_model_dir(model_dir);
    ValidationReport report =
        validate_interaction_model(loaded.model, BuiltinCatalog::bundled());
    if (!report.ok()) {
      err << report.to_string();
      return kExitUsage;
    }
    grammar = build_grammar(loaded.model, BuiltinCatalog::bundled());
  } else {
    ModelStore store(global.store_path());
    grammar = store.load(skill_id).grammar;
  }
  for (const auto& sample : sample_utterances(grammar, size_t(n), seed)) {
    if (format == "corpus") {
      out << corpus_line(sample.tokens, sample.frame) << "\n";
    } else {
      out << sample.frame.intent << " " << join(sample.tokens) << "\t"
          << sample.frame.to_json() << "\n";
    }
  }
  return kExitOk;
}

int cmd_eval(const GlobalOpts& global, const std::string& skill_id,
             const std::string& test_file, std::ostream& out, std::ostream& err) {
  if (!fs::exists(test_file)) {
    err << "test file not found: " << test_file << "\n";
    return kExitUsage;
  }
  std::vector<EvalParseIssue> issues;
  std::vector<EvalExample> examples = parse_eval_file(read_file(test_file), &issues);
  for (const auto& issue : issues)
    err << "line " << issue.line << ": " << issue.message << " (skipped)\n";
  if (examples.empty()) {
    err << "test file has no usable examples\n";
    return kExitUsage;
  }

  ModelStore store(global.store_path());
  NluEngine engine(store.load(skill_id));
  EvalMetrics metrics = evaluate(engine, examples);
  out << metrics.to_json() << "\n" << metrics.human();
  return kExitOk;
}

int cmd_pipeline_show(const std::string& recipe_name, std::ostream& out,
                      std::ostream& err) {
  if (recipe_name.empty()) {
    for (const auto& recipe : builtin_recipes()) {
      CommandSpec spec = generate_cli(recipe);
      out << recipe.name << " (" << spec.name << ")\n";
      for (const auto& node : recipe.nodes) {
        out << "  " << node.activity << "(";
        for (size_t i = 0; i < node.inputs.size(); ++i)
          out << (i ? ", " : "") << node.inputs[i];
        out << ") -> ";
        for (size_t i = 0; i < node.outputs.size(); ++i)
          out << (i ? ", " : "") << node.outputs[i];
        out << "\n";
      }
    }
    return kExitOk;
  }
  const RecipeDAG* recipe = find_recipe(recipe_name);
  if (!recipe) {
    err << "unknown recipe: " << recipe_name << "\n";
    return kExitUsage;
  }
  out << serialize_dag(*recipe) << "\n";
  return kExitOk;
}

std::map<std::string, std::string> parse_kv(const std::vector<std::string>& pairs,
                                            const char* what) {
  std::map<std::string, std::string> out;
  for (const auto& p : pairs) {
    size_t eq = p.find('=');
    if (eq == std::string::npos)
      throw PipelineError(std::string(what) + " must be key=value: " + p);
    out[p.substr(0, eq)] = p.substr(eq + 1);
  }
  return out;
}

int cmd_pipeline_run(const GlobalOpts& global, const std::string& dag_file,
                     const std::vector<std::string>& params,
                     const std::vector<std::string>& artifacts,
                     const std::string& artifact_root, std::ostream& out,
                     std::ostream& err) {
  RecipeDAG dag = deserialize_dag(read_file(dag_file), builtin_activities());
  for (const auto& [name, uri] : parse_kv(artifacts, "--artifact"))
    dag.artifact_uris[name] = uri;

  fs::path root = artifact_root.empty() ? ArtifactIO::default_root() : fs::path(artifact_root);
  ArtifactIO io(root);
  ExecutorOptions options = ExecutorOptions::parse(global.executor);
  options.log_sink = [&err](const std::string& line) { err << line << "\n"; };

  RunReport report =
      execute(dag, builtin_activities(), io, options, parse_kv(params, "--param"));
  out << report.summary();
  return report.ok() ? kExitOk : kExitInternal;
}

// Runs a generated recipe subcommand: flags were declared from generate_cli.
int run_recipe_command(const GlobalOpts& global, const RecipeDAG& recipe,
                       const std::map<std::string, std::string>& params,
                       const std::map<std::string, std::string>& artifact_uris,
                       const std::string& artifact_root, std::ostream& out) {
  RecipeDAG dag = recipe;
  for (const auto& [name, uri] : artifact_uris)
    if (!uri.empty()) dag.artifact_uris[name] = uri;

  fs::path root = artifact_root.empty() ? ArtifactIO::default_root() : fs::path(artifact_root);
  ArtifactIO io(root);
  RunReport report = execute(dag, builtin_activities(), io,
                             ExecutorOptions::parse(global.executor), params);
  out << report.summary();
  return report.ok() ? kExitOk : kExitInternal;
}

}  // namespace

int run_cli(std::vector<std::string> args, std::istream& in, std::ostream& out,
            std::ostream& err) {
  CLI::App app{"skill NLU toolkit: build, test and serve interaction models"};
  app.require_subcommand(0, 1);

  GlobalOpts global;
  app.add_option("--store", global.store_dir, "model store directory");
  app.add_option("--executor", global.executor,
                 "local | parallel[:N] executor for builds");
  app.add_option("--seed", global.seed, "seed override for builds/sampling");
  app.add_option("--config", global.config_file, "training defaults (JSON key-value)");

  // build
  auto* build = app.add_subcommand("build", "compile a model dir into a stored bundle");
  std::string model_dir, skill_id_flag, priors;
  build->add_option("--model-dir", model_dir, "directory with schema.json + utterances.txt")
      ->required();
  build->add_option("--skill-id", skill_id_flag, "override the skill id");
  build->add_option("--priors", priors, "uniform | empirical");

  // console
  auto* console = app.add_subcommand("console", "interactive recognition console");
  std::string console_skill;
  console->add_option("skill", console_skill, "skill id")->required();

  // sample
  auto* sample = app.add_subcommand("sample", "draw utterances from the grammar");
  std::string sample_skill, sample_model_dir, sample_format = "sample";
  uint64_t sample_n = 10, sample_seed = 42;
  sample->add_option("skill", sample_skill, "skill id (or use --model-dir)");
  sample->add_option("--model-dir", sample_model_dir, "sample without a stored bundle");
  sample->add_option("-n,--count", sample_n, "number of samples");
  sample->add_option("--seed", sample_seed, "sampling seed");
  sample->add_option("--format", sample_format, "sample | corpus");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "score a gold test file");
  std::string eval_skill, eval_file;
  eval_cmd->add_option("skill", eval_skill, "skill id")->required();
  eval_cmd->add_option("--test-file", eval_file, "utterance TAB frame-json lines")
      ->required();

  // pipeline
  auto* pipeline = app.add_subcommand("pipeline", "run or inspect recipe DAGs");
  auto* pipeline_run = pipeline->add_subcommand("run", "execute a serialized DAG");
  std::string dag_file, artifact_root;
  std::vector<std::string> run_params, run_artifacts;
  pipeline_run->add_option("dag", dag_file, "recipe DAG JSON file")->required();
  pipeline_run->add_option("--param", run_params, "key=value parameter override");
  pipeline_run->add_option("--artifact", run_artifacts, "name=uri artifact binding");
  pipeline_run->add_option("--artifact-root", artifact_root, "artifact root directory");
  auto* pipeline_show = pipeline->add_subcommand("show", "list recipes / print a DAG");
  std::string show_recipe;
  pipeline_show->add_option("recipe", show_recipe, "recipe name");

  // autogenerated recipe subcommands
  struct GeneratedCommand {
    const RecipeDAG* recipe;
    std::shared_ptr<std::map<std::string, std::string>> params;
    std::shared_ptr<std::map<std::string, std::string>> artifacts;
    CLI::App* cmd;
  };
  std::vector<GeneratedCommand> generated;
  std::string generated_root;
  for (const auto& recipe : builtin_recipes()) {
    CommandSpec spec = generate_cli(recipe);
    auto* cmd = app.add_subcommand(spec.name, "recipe: " + recipe.name);
    GeneratedCommand gen{&recipe,
                         std::make_shared<std::map<std::string, std::string>>(),
                         std::make_shared<std::map<std::string, std::string>>(), cmd};
    for (const auto& flag : spec.flags) {
      if (flag.kind == CliFlag::Kind::Param) {
        auto slot = &(*gen.params)[flag.key];
        cmd->add_option(flag.flag, *slot, "recipe parameter");
      } else if (flag.kind == CliFlag::Kind::SourceArtifact) {
        auto slot = &(*gen.artifacts)[flag.key];
        cmd->add_option(flag.flag, *slot, "source artifact URI");
      }
      // --executor comes from the global flag
    }
    cmd->add_option("--artifact-root", generated_root, "artifact root directory");
    generated.push_back(std::move(gen));
  }

  std::vector<const char*> argv;
  argv.push_back("slukit");
  for (const auto& a : args) argv.push_back(a.c_str());

  try {
    app.parse(int(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    std::ostringstream help;
    help << app.help();
    out << help.str();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (*build) return cmd_build(global, model_dir, skill_id_flag, priors, out, err);
    if (*console) return cmd_console(global, console_skill, in, out, err);
    if (*sample) {
      if (sample_skill.empty() && sample_model_dir.empty()) {
        err << "sample: give a skill id or --model-dir\n";
        return kExitUsage;
      }
      uint64_t seed = global.seed ? global.seed : sample_seed;
      return cmd_sample(global, sample_skill, sample_model_dir, sample_n, seed,
                        sample_format, out, err);
    }
    if (*eval_cmd) return cmd_eval(global, eval_skill, eval_file, out, err);
    if (*pipeline) {
      if (*pipeline_run)
        return cmd_pipeline_run(global, dag_file, run_params, run_artifacts,
                                artifact_root, out, err);
      return cmd_pipeline_show(show_recipe, out, err);
    }
    for (const auto& gen : generated) {
      if (!*gen.cmd) continue;
      std::map<std::string, std::string> params;
      for (const auto& [k, v] : *gen.params)
        if (!v.empty()) params[k] = v;
      return run_recipe_command(global, *gen.recipe, params, *gen.artifacts,
                                generated_root, out);
    }
    out << app.help();
    return kExitOk;
  } catch (const ParseError& e) {
    err << e.what() << "\n";
    return kExitUsage;
  } catch (const IoError& e) {
    err << e.what() << "\n";
    return kExitUsage;
  } catch (const StoreError& e) {
    err << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitInternal;
  }
}

int run_cli_main(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run_cli(std::move(args), std::cin, std::cout, std::cerr);
}

}  // namespace slu
