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

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace slu {

class PipelineError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// --- artifact storage --------------------------------------------------------

// File-backed key-value store. Keys are escaped into file names; writes are
// temp-then-rename atomic.
class KvStore {
 public:
  explicit KvStore(std::filesystem::path root) : root_(std::move(root)) {}

  void put(std::string_view key, std::string_view value);
  std::string get(std::string_view key) const;
  bool exists(std::string_view key) const;

  const std::filesystem::path& root() const { return root_; }

 private:
  std::filesystem::path path_for(std::string_view key) const;
  std::filesystem::path root_;
};

// Uniform interface over heterogeneous artifact locations:
//   mem:name   in-memory (per ArtifactIO instance)
//   kv:key     embedded key-value store under <root>/kv
//   file:path  explicit file path (absolute, or relative to root)
//   path       same as file:path
// Writes are atomic; artifacts are immutable once produced within a run.
class ArtifactIO {
 public:
  explicit ArtifactIO(std::filesystem::path root);

  std::string fetch(const std::string& uri) const;
  void put(const std::string& uri, std::string_view data);
  bool exists(const std::string& uri) const;
  std::string digest(const std::string& uri) const;  // sha256 hex

  const std::filesystem::path& root() const { return root_; }

  // Default root comes from this environment variable, else cwd.
  static const char* kRootEnvVar;
  static std::filesystem::path default_root();

 private:
  std::filesystem::path file_path(std::string_view rest) const;
  std::filesystem::path root_;
  KvStore kv_;
  mutable std::mutex mem_mutex_;
  std::map<std::string, std::string, std::less<>> mem_;
};

// --- activities ----------------------------------------------------------------

class ActivityContext {
 public:
  ActivityContext(ArtifactIO& io, std::vector<std::string> input_uris,
                  std::vector<std::string> output_uris,
                  std::map<std::string, std::string> params)
      : io_(io),
        inputs_(std::move(input_uris)),
        outputs_(std::move(output_uris)),
        params_(std::move(params)) {}

  size_t input_count() const { return inputs_.size(); }
  std::string fetch(size_t i) const { return io_.fetch(inputs_.at(i)); }
  void put(size_t i, std::string_view data) { io_.put(outputs_.at(i), data); }

  const std::string& input_uri(size_t i) const { return inputs_.at(i); }
  const std::string& output_uri(size_t i) const { return outputs_.at(i); }

  std::string param(const std::string& key, const std::string& fallback = "") const;
  int64_t param_int(const std::string& key, int64_t fallback) const;
  double param_double(const std::string& key, double fallback) const;

  void log(std::string line);
  std::vector<std::string> take_logs() { return std::move(logs_); }

 private:
  ArtifactIO& io_;
  std::vector<std::string> inputs_;
  std::vector<std::string> outputs_;
  std::map<std::string, std::string> params_;
  std::vector<std::string> logs_;
};

using ActivityFn = std::function<void(ActivityContext&)>;

// Lightweight wrapper around a component: declared inputs/outputs fully
// determine its data dependencies.
struct ActivityDecl {
  std::string name;
  size_t n_inputs = 0;
  size_t n_outputs = 0;
  std::string description;
  ActivityFn fn;
};

class ActivityRegistry {
 public:
  void add(ActivityDecl decl);
  const ActivityDecl* find(std::string_view name) const;
  std::vector<std::string> names() const;

 private:
  std::vector<ActivityDecl> decls_;
};

// Registry of the built-in skill building activities plus anything the
// embedding application registers.
ActivityRegistry& builtin_activities();

// --- recipes -------------------------------------------------------------------

struct DagNode {
  std::string activity;
  std::vector<std::string> inputs;   // artifact names
  std::vector<std::string> outputs;  // artifact names
};

struct RecipeDAG {
  static constexpr uint32_t kSchemaVersion = 1;

  std::string name;
  std::vector<DagNode> nodes;
  std::map<std::string, std::string> params;         // name -> default value
  std::map<std::string, std::string> artifact_uris;  // name -> bound URI ("" = unbound)
  std::vector<std::string> outputs;                  // sink artifact names

  // artifact names consumed but never produced (recipe inputs)
  std::vector<std::string> source_artifacts() const;
  // producer node index per artifact
  std::map<std::string, size_t> producers() const;

  bool structurally_equal(const RecipeDAG& other) const;
};

// Declarative recipe builder; `build` validates against the registry and
// returns the symbolic DAG.
class RecipeBuilder {
 public:
  explicit RecipeBuilder(std::string name);

  RecipeBuilder& param(std::string name, std::string default_value = "");
  RecipeBuilder& artifact(std::string name, std::string uri = "");
  RecipeBuilder& step(std::string activity, std::vector<std::string> inputs,
                      std::vector<std::string> outputs);

  RecipeDAG build(const ActivityRegistry& registry) const;

 private:
  RecipeDAG dag_;
};

// Validation shared by RecipeBuilder::build and deserialize_dag: activities
// registered with matching arity, single producer per artifact, no cycles.
void validate_dag(const RecipeDAG& dag, const ActivityRegistry& registry);

std::string serialize_dag(const RecipeDAG& dag, bool pretty = true);
RecipeDAG deserialize_dag(std::string_view text, const ActivityRegistry& registry);

// --- execution -------------------------------------------------------------------

enum class ActivityStatus { Success, Failed, Skipped };

struct ActivityReport {
  std::string node;  // "<index>:<activity>"
  ActivityStatus status = ActivityStatus::Skipped;
  uint32_t retries = 0;
  double wall_ms = 0;
  std::string error;
  std::vector<std::string> logs;
};

struct RunReport {
  std::vector<ActivityReport> activities;
  double total_wall_ms = 0;

  bool ok() const;
  std::string summary() const;
};

struct ExecutorOptions {
  enum class Kind { Sequential, Parallel };
  Kind kind = Kind::Sequential;
  size_t max_workers = 4;
  uint32_t max_retries = 0;
  // one JSON object per activity event; must be thread-safe to call
  std::function<void(const std::string&)> log_sink;
  std::atomic<bool>* cancel = nullptr;

  static ExecutorOptions sequential() { return {}; }
  static ExecutorOptions parallel(size_t workers) {
    ExecutorOptions o;
    o.kind = Kind::Parallel;
    o.max_workers = workers;
    return o;
  }
  // Parses "local", "sequential", "parallel", or "parallel:N".
  static ExecutorOptions parse(std::string_view spec);
};

// Topological execution. Parameters in `param_overrides` replace recipe
// defaults; every source artifact must exist before the run starts.
RunReport execute(const RecipeDAG& dag, const ActivityRegistry& registry,
                  ArtifactIO& io, const ExecutorOptions& options,
                  const std::map<std::string, std::string>& param_overrides = {});

// --- generated CLI -------------------------------------------------------------

struct CliFlag {
  std::string flag;  // "--sample-count"
  std::string key;   // recipe parameter or artifact name
  enum class Kind { Param, SourceArtifact, Executor } kind;
};

struct CommandSpec {
  std::string name;  // kebab-case recipe name
  std::vector<CliFlag> flags;
};

// Every recipe converts into an equivalent subcommand: one flag per recipe
// parameter, one per source artifact URI, plus --executor.
CommandSpec generate_cli(const RecipeDAG& dag);

}  // namespace slu
