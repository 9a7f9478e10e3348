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

#include "slu/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <condition_variable>
#include <cstdio>
#include <cstdlib>
#include <deque>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "slu/hashing.hpp"
#include "slu/io.hpp"

namespace slu {

using nlohmann::json;
namespace fs = std::filesystem;

// --- KvStore -------------------------------------------------------------------

fs::path KvStore::path_for(std::string_view key) const {
  std::string escaped;
  for (char c : key) {
    bool safe = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                (c >= '0' && c <= '9') || c == '-' || c == '_' || c == '.';
    if (safe) {
      escaped.push_back(c);
    } else if (c == '/') {
      escaped.push_back(c);  // keep key namespaces as directories
    } else {
      char buf[4];
      std::snprintf(buf, sizeof(buf), "%%%02x", static_cast<unsigned char>(c));
      escaped += buf;
    }
  }
  return root_ / escaped;
}

void KvStore::put(std::string_view key, std::string_view value) {
  write_file_atomic(path_for(key), value);
}

std::string KvStore::get(std::string_view key) const {
  fs::path p = path_for(key);
  if (!fs::exists(p)) throw PipelineError("kv key not found: " + std::string(key));
  return read_file(p);
}

bool KvStore::exists(std::string_view key) const { return fs::exists(path_for(key)); }

// --- ArtifactIO ----------------------------------------------------------------

const char* ArtifactIO::kRootEnvVar = "SLU_ARTIFACT_ROOT";

fs::path ArtifactIO::default_root() {
  if (const char* env = std::getenv(kRootEnvVar)) return fs::path(env);
  return fs::current_path();
}

ArtifactIO::ArtifactIO(fs::path root) : root_(std::move(root)), kv_(root_ / "kv") {}

fs::path ArtifactIO::file_path(std::string_view rest) const {
  fs::path p{std::string(rest)};
  if (p.is_absolute()) return p;
  return root_ / p;
}

namespace {
std::pair<std::string_view, std::string_view> split_uri(const std::string& uri) {
  if (uri.starts_with("mem:")) return {"mem", std::string_view(uri).substr(4)};
  if (uri.starts_with("kv:")) return {"kv", std::string_view(uri).substr(3)};
  if (uri.starts_with("file:")) return {"file", std::string_view(uri).substr(5)};
  return {"file", uri};
}
}  // namespace

std::string ArtifactIO::fetch(const std::string& uri) const {
  auto [scheme, rest] = split_uri(uri);
  if (scheme == "mem") {
    std::lock_guard lock(mem_mutex_);
    auto it = mem_.find(rest);
    if (it == mem_.end()) throw PipelineError("artifact not found: " + uri);
    return it->second;
  }
  if (scheme == "kv") return kv_.get(rest);
  fs::path p = file_path(rest);
  if (!fs::exists(p)) throw PipelineError("artifact not found: " + uri);
  return read_file(p);
}

void ArtifactIO::put(const std::string& uri, std::string_view data) {
  auto [scheme, rest] = split_uri(uri);
  if (scheme == "mem") {
    std::lock_guard lock(mem_mutex_);
    mem_[std::string(rest)] = std::string(data);
    return;
  }
  if (scheme == "kv") {
    kv_.put(rest, data);
    return;
  }
  write_file_atomic(file_path(rest), data);
}

bool ArtifactIO::exists(const std::string& uri) const {
  auto [scheme, rest] = split_uri(uri);
  if (scheme == "mem") {
    std::lock_guard lock(mem_mutex_);
    return mem_.count(rest) > 0;
  }
  if (scheme == "kv") return kv_.exists(rest);
  return fs::exists(file_path(rest));
}

std::string ArtifactIO::digest(const std::string& uri) const {
  return sha256_hex(fetch(uri));
}

// --- ActivityContext / registry ---------------------------------------------------

std::string ActivityContext::param(const std::string& key, const std::string& fallback) const {
  auto it = params_.find(key);
  return it == params_.end() || it->second.empty() ? fallback : it->second;
}

int64_t ActivityContext::param_int(const std::string& key, int64_t fallback) const {
  auto it = params_.find(key);
  if (it == params_.end() || it->second.empty()) return fallback;
  return std::stoll(it->second);
}

double ActivityContext::param_double(const std::string& key, double fallback) const {
  auto it = params_.find(key);
  if (it == params_.end() || it->second.empty()) return fallback;
  return std::stod(it->second);
}

void ActivityContext::log(std::string line) { logs_.push_back(std::move(line)); }

void ActivityRegistry::add(ActivityDecl decl) {
  if (find(decl.name)) throw PipelineError("activity already registered: " + decl.name);
  decls_.push_back(std::move(decl));
}

const ActivityDecl* ActivityRegistry::find(std::string_view name) const {
  for (const auto& d : decls_)
    if (d.name == name) return &d;
  return nullptr;
}

std::vector<std::string> ActivityRegistry::names() const {
  std::vector<std::string> out;
  for (const auto& d : decls_) out.push_back(d.name);
  return out;
}

// --- RecipeDAG ---------------------------------------------------------------------

std::map<std::string, size_t> RecipeDAG::producers() const {
  std::map<std::string, size_t> out;
  for (size_t i = 0; i < nodes.size(); ++i)
    for (const auto& a : nodes[i].outputs) out.emplace(a, i);
  return out;
}

std::vector<std::string> RecipeDAG::source_artifacts() const {
  auto produced = producers();
  std::set<std::string> seen;
  std::vector<std::string> out;
  for (const auto& node : nodes)
    for (const auto& a : node.inputs)
      if (!produced.count(a) && seen.insert(a).second) out.push_back(a);
  return out;
}

bool RecipeDAG::structurally_equal(const RecipeDAG& other) const {
  if (name != other.name || params != other.params ||
      artifact_uris != other.artifact_uris || outputs != other.outputs ||
      nodes.size() != other.nodes.size())
    return false;
  for (size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].activity != other.nodes[i].activity ||
        nodes[i].inputs != other.nodes[i].inputs ||
        nodes[i].outputs != other.nodes[i].outputs)
      return false;
  }
  return true;
}

RecipeBuilder::RecipeBuilder(std::string name) { dag_.name = std::move(name); }

RecipeBuilder& RecipeBuilder::param(std::string name, std::string default_value) {
  dag_.params[std::move(name)] = std::move(default_value);
  return *this;
}

RecipeBuilder& RecipeBuilder::artifact(std::string name, std::string uri) {
  dag_.artifact_uris[std::move(name)] = std::move(uri);
  return *this;
}

RecipeBuilder& RecipeBuilder::step(std::string activity, std::vector<std::string> inputs,
                                   std::vector<std::string> outputs) {
  dag_.nodes.push_back({std::move(activity), std::move(inputs), std::move(outputs)});
  return *this;
}

void validate_dag(const RecipeDAG& dag, const ActivityRegistry& registry) {
  // activities exist, arity matches
  for (const auto& node : dag.nodes) {
    const ActivityDecl* decl = registry.find(node.activity);
    if (!decl) throw PipelineError("unregistered activity: " + node.activity);
    if (node.inputs.size() != decl->n_inputs || node.outputs.size() != decl->n_outputs)
      throw PipelineError("activity " + node.activity + " expects " +
                          std::to_string(decl->n_inputs) + " inputs / " +
                          std::to_string(decl->n_outputs) + " outputs");
  }

  // single producer per artifact
  std::map<std::string, size_t> producer;
  for (size_t i = 0; i < dag.nodes.size(); ++i) {
    for (const auto& a : dag.nodes[i].outputs) {
      auto [it, inserted] = producer.emplace(a, i);
      if (!inserted)
        throw PipelineError("artifact has two producers: " + a);
    }
  }

  // acyclic (Kahn over producer edges)
  size_t n = dag.nodes.size();
  std::vector<std::set<size_t>> deps(n);
  for (size_t i = 0; i < n; ++i)
    for (const auto& a : dag.nodes[i].inputs) {
      auto it = producer.find(a);
      if (it != producer.end() && it->second != i) deps[i].insert(it->second);
    }
  std::vector<size_t> indeg(n, 0);
  std::vector<std::vector<size_t>> dependents(n);
  for (size_t i = 0; i < n; ++i) {
    indeg[i] = deps[i].size();
    for (size_t d : deps[i]) dependents[d].push_back(i);
  }
  std::deque<size_t> ready;
  for (size_t i = 0; i < n; ++i)
    if (indeg[i] == 0) ready.push_back(i);
  size_t seen = 0;
  while (!ready.empty()) {
    size_t i = ready.front();
    ready.pop_front();
    ++seen;
    for (size_t d : dependents[i])
      if (--indeg[d] == 0) ready.push_back(d);
  }
  if (seen != n) throw PipelineError("recipe has a cycle");

  // a node consuming its own output is a self-cycle
  for (const auto& node : dag.nodes)
    for (const auto& a : node.inputs)
      if (std::find(node.outputs.begin(), node.outputs.end(), a) != node.outputs.end())
        throw PipelineError("recipe has a cycle");
}

RecipeDAG RecipeBuilder::build(const ActivityRegistry& registry) const {
  RecipeDAG dag = dag_;
  validate_dag(dag, registry);

  // implicit artifact declarations + sink outputs
  std::set<std::string> consumed;
  for (const auto& node : dag.nodes) {
    for (const auto& a : node.inputs) {
      consumed.insert(a);
      dag.artifact_uris.try_emplace(a, "");
    }
    for (const auto& a : node.outputs) dag.artifact_uris.try_emplace(a, "");
  }
  std::set<std::string> declared(dag.outputs.begin(), dag.outputs.end());
  for (const auto& node : dag.nodes)
    for (const auto& a : node.outputs)
      if (!consumed.count(a) && !declared.count(a)) dag.outputs.push_back(a);
  return dag;
}

std::string serialize_dag(const RecipeDAG& dag, bool pretty) {
  json j;
  j["schema_version"] = RecipeDAG::kSchemaVersion;
  j["name"] = dag.name;
  j["params"] = dag.params;
  json artifacts = json::array();
  for (const auto& [name, uri] : dag.artifact_uris)
    artifacts.push_back(json{{"name", name}, {"uri", uri}});
  j["artifacts"] = std::move(artifacts);
  json nodes = json::array();
  for (const auto& node : dag.nodes)
    nodes.push_back(json{{"activity", node.activity},
                         {"inputs", node.inputs},
                         {"outputs", node.outputs}});
  j["nodes"] = std::move(nodes);
  j["outputs"] = dag.outputs;
  return j.dump(pretty ? 2 : -1);
}

RecipeDAG deserialize_dag(std::string_view text, const ActivityRegistry& registry) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw PipelineError("malformed recipe JSON");
  uint32_t version = j.value("schema_version", 0u);
  if (version != RecipeDAG::kSchemaVersion)
    throw PipelineError("unsupported recipe schema version " + std::to_string(version));

  RecipeDAG dag;
  dag.name = j.value("name", std::string());
  if (j.contains("params"))
    for (const auto& [k, v] : j["params"].items()) dag.params[k] = v.get<std::string>();
  for (const auto& aj : j.value("artifacts", json::array()))
    dag.artifact_uris[aj.value("name", std::string())] = aj.value("uri", std::string());
  for (const auto& nj : j.value("nodes", json::array())) {
    DagNode node;
    node.activity = nj.value("activity", std::string());
    for (const auto& a : nj.value("inputs", json::array()))
      node.inputs.push_back(a.get<std::string>());
    for (const auto& a : nj.value("outputs", json::array()))
      node.outputs.push_back(a.get<std::string>());
    dag.nodes.push_back(std::move(node));
  }
  for (const auto& o : j.value("outputs", json::array()))
    dag.outputs.push_back(o.get<std::string>());

  validate_dag(dag, registry);
  return dag;
}

// --- execution ------------------------------------------------------------------

bool RunReport::ok() const {
  for (const auto& a : activities)
    if (a.status != ActivityStatus::Success) return false;
  return true;
}

std::string RunReport::summary() const {
  std::ostringstream out;
  for (const auto& a : activities) {
    const char* status = a.status == ActivityStatus::Success ? "ok"
                         : a.status == ActivityStatus::Failed ? "FAILED"
                                                              : "skipped";
    out << "  " << a.node << ": " << status;
    if (a.retries) out << " (retries=" << a.retries << ")";
    if (!a.error.empty()) out << " [" << a.error << "]";
    out << " " << a.wall_ms << " ms\n";
  }
  out << "total: " << total_wall_ms << " ms\n";
  return out.str();
}

ExecutorOptions ExecutorOptions::parse(std::string_view spec) {
  if (spec == "local" || spec == "sequential" || spec.empty()) return sequential();
  if (spec == "parallel") return parallel(4);
  if (spec.starts_with("parallel:")) {
    size_t workers = std::stoul(std::string(spec.substr(9)));
    if (workers == 0) workers = 1;
    return parallel(workers);
  }
  throw PipelineError("unknown executor: " + std::string(spec));
}

namespace {

struct Scheduler {
  const RecipeDAG& dag;
  std::vector<std::set<size_t>> deps;
  std::vector<std::vector<size_t>> dependents;
  std::map<std::string, std::string> uris;  // artifact name -> resolved uri

  explicit Scheduler(const RecipeDAG& d) : dag(d) {
    auto producer = d.producers();
    size_t n = d.nodes.size();
    deps.resize(n);
    dependents.resize(n);
    for (size_t i = 0; i < n; ++i)
      for (const auto& a : d.nodes[i].inputs) {
        auto it = producer.find(a);
        if (it != producer.end() && it->second != i) deps[i].insert(it->second);
      }
    for (size_t i = 0; i < n; ++i)
      for (size_t dep : deps[i]) dependents[dep].push_back(i);

    for (const auto& [name, uri] : d.artifact_uris)
      uris[name] = uri.empty() ? "mem:" + d.name + "/" + name : uri;
    for (const auto& node : d.nodes) {
      for (const auto& a : node.inputs) uris.try_emplace(a, "mem:" + d.name + "/" + a);
      for (const auto& a : node.outputs) uris.try_emplace(a, "mem:" + d.name + "/" + a);
    }
  }

  std::vector<std::string> uris_of(const std::vector<std::string>& names) const {
    std::vector<std::string> out;
    out.reserve(names.size());
    for (const auto& n : names) out.push_back(uris.at(n));
    return out;
  }
};

std::string event_json(const std::string& event, const std::string& node, double ms,
                       const std::string& detail = "") {
  json j{{"event", event}, {"node", node}, {"t_ms", ms}};
  if (!detail.empty()) j["detail"] = detail;
  return j.dump();
}

class Coordinator {
 public:
  Coordinator(const RecipeDAG& dag, const ActivityRegistry& registry, ArtifactIO& io,
              const ExecutorOptions& options,
              const std::map<std::string, std::string>& overrides)
      : dag_(dag), registry_(registry), io_(io), options_(options), sched_(dag) {
    params_ = dag.params;
    for (const auto& [k, v] : overrides) params_[k] = v;
    size_t n = dag.nodes.size();
    reports_.resize(n);
    remaining_.resize(n);
    for (size_t i = 0; i < n; ++i) {
      reports_[i].node = std::to_string(i) + ":" + dag.nodes[i].activity;
      remaining_[i] = sched_.deps[i].size();
      if (remaining_[i] == 0) ready_.push_back(i);
    }
  }

  RunReport run() {
    using clock = std::chrono::steady_clock;
    auto t0 = clock::now();

    // every source artifact must exist up front
    for (const auto& name : dag_.source_artifacts()) {
      const std::string& uri = sched_.uris.at(name);
      if (!io_.exists(uri))
        throw PipelineError("missing source artifact: " + name + " (" + uri + ")");
    }

    if (options_.kind == ExecutorOptions::Kind::Parallel && dag_.nodes.size() > 1) {
      run_parallel();
    } else {
      run_sequential();
    }

    RunReport report;
    report.activities = std::move(reports_);
    report.total_wall_ms =
        std::chrono::duration<double, std::milli>(clock::now() - t0).count();
    return report;
  }

 private:
  void emit(const std::string& line) {
    if (!options_.log_sink) return;
    std::lock_guard lock(log_mutex_);
    options_.log_sink(line);
  }

  double now_ms() {
    using clock = std::chrono::steady_clock;
    static const auto start = clock::now();
    return std::chrono::duration<double, std::milli>(clock::now() - start).count();
  }

  bool cancelled() const { return options_.cancel && options_.cancel->load(); }

  // Runs one node to completion (with retries); fills its report.
  void run_node(size_t i) {
    ActivityReport& rep = reports_[i];
    const DagNode& node = dag_.nodes[i];
    const ActivityDecl* decl = registry_.find(node.activity);
    using clock = std::chrono::steady_clock;
    auto t0 = clock::now();

    if (cancelled()) {
      rep.status = ActivityStatus::Skipped;
      rep.error = "cancelled";
      emit(event_json("skipped", rep.node, now_ms(), "cancelled"));
      return;
    }

    uint32_t attempt = 0;
    while (true) {
      emit(event_json(attempt == 0 ? "started" : "retry", rep.node, now_ms()));
      try {
        ActivityContext ctx(io_, sched_.uris_of(node.inputs), sched_.uris_of(node.outputs),
                            params_);
        decl->fn(ctx);
        for (size_t o = 0; o < node.outputs.size(); ++o) {
          if (!io_.exists(ctx.output_uri(o)))
            throw PipelineError("activity did not produce output " + node.outputs[o]);
        }
        rep.logs = ctx.take_logs();
        rep.status = ActivityStatus::Success;
        break;
      } catch (const std::exception& e) {
        if (attempt < options_.max_retries) {
          ++attempt;
          continue;
        }
        rep.status = ActivityStatus::Failed;
        rep.error = e.what();
        break;
      }
    }
    rep.retries = attempt;
    rep.wall_ms = std::chrono::duration<double, std::milli>(clock::now() - t0).count();
    emit(event_json(rep.status == ActivityStatus::Success ? "succeeded" : "failed",
                    rep.node, now_ms(), rep.error));
  }

  // Marks node i done; unlocks or skips dependents. Caller holds the lock in
  // parallel mode.
  void finish_node(size_t i) {
    if (reports_[i].status == ActivityStatus::Success) {
      for (size_t d : sched_.dependents[i])
        if (--remaining_[d] == 0) ready_.push_back(d);
    } else {
      skip_dependents(i);
    }
  }

  void skip_dependents(size_t failed) {
    for (size_t d : sched_.dependents[failed]) {
      if (reports_[d].status == ActivityStatus::Skipped && !reports_[d].error.empty())
        continue;  // already skipped
      reports_[d].status = ActivityStatus::Skipped;
      reports_[d].error = "dependency failed: " + reports_[failed].node;
      emit(event_json("skipped", reports_[d].node, now_ms(), reports_[d].error));
      skipped_.insert(d);
      skip_dependents(d);
    }
  }

  void run_sequential() {
    while (!ready_.empty()) {
      std::sort(ready_.begin(), ready_.end());
      size_t i = ready_.front();
      ready_.erase(ready_.begin());
      if (skipped_.count(i)) continue;
      run_node(i);
      finish_node(i);
    }
  }

  void run_parallel() {
    std::mutex mu;
    std::condition_variable cv;
    size_t running = 0;
    size_t done = 0;
    size_t total = dag_.nodes.size();

    auto worker_loop = [&] {
      std::unique_lock lock(mu);
      while (true) {
        while (ready_.empty() && done + skipped_count_locked() < total && running > 0)
          cv.wait(lock);
        if (ready_.empty()) return;
        std::sort(ready_.begin(), ready_.end());
        size_t i = ready_.front();
        ready_.erase(ready_.begin());
        if (skipped_.count(i)) {
          ++done;
          continue;
        }
        ++running;
        lock.unlock();
        run_node(i);
        lock.lock();
        --running;
        finish_node(i);
        ++done;
        cv.notify_all();
      }
    };

    size_t workers = std::max<size_t>(1, options_.max_workers);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (size_t w = 0; w < workers; ++w) pool.emplace_back(worker_loop);
    for (auto& t : pool) t.join();
  }

  size_t skipped_count_locked() const { return skipped_.size(); }

  const RecipeDAG& dag_;
  const ActivityRegistry& registry_;
  ArtifactIO& io_;
  const ExecutorOptions& options_;
  Scheduler sched_;
  std::map<std::string, std::string> params_;
  std::vector<ActivityReport> reports_;
  std::vector<size_t> remaining_;
  std::vector<size_t> ready_;
  std::set<size_t> skipped_;
  std::mutex log_mutex_;
};

}  // namespace

RunReport execute(const RecipeDAG& dag, const ActivityRegistry& registry,
                  ArtifactIO& io, const ExecutorOptions& options,
                  const std::map<std::string, std::string>& param_overrides) {
  validate_dag(dag, registry);
  Coordinator coordinator(dag, registry, io, options, param_overrides);
  return coordinator.run();
}

// --- generated CLI -----------------------------------------------------------------

namespace {
std::string kebab(std::string_view name) {
  std::string out;
  for (char c : name) out.push_back(c == '_' || c == ' ' ? '-' : char(std::tolower(c)));
  return out;
}
}  // namespace

CommandSpec generate_cli(const RecipeDAG& dag) {
  static const std::set<std::string> reserved = {"executor", "help"};
  CommandSpec spec;
  spec.name = kebab(dag.name);
  std::set<std::string> used;
  for (const auto& [param, def] : dag.params) {
    (void)def;
    if (reserved.count(param))
      throw PipelineError("recipe parameter uses a reserved flag name: " + param);
    if (!used.insert(kebab(param)).second)
      throw PipelineError("flag name collision: " + param);
    spec.flags.push_back({"--" + kebab(param), param, CliFlag::Kind::Param});
  }
  for (const auto& artifact : dag.source_artifacts()) {
    if (reserved.count(artifact))
      throw PipelineError("source artifact uses a reserved flag name: " + artifact);
    if (!used.insert(kebab(artifact)).second)
      throw PipelineError("flag name collision: " + artifact);
    spec.flags.push_back({"--" + kebab(artifact), artifact, CliFlag::Kind::SourceArtifact});
  }
  spec.flags.push_back({"--executor", "executor", CliFlag::Kind::Executor});
  return spec;
}

}  // namespace slu
