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

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "slu/bloom.hpp"
#include "slu/builder.hpp"
#include "slu/dialogue.hpp"
#include "slu/eval.hpp"
#include "slu/grammar.hpp"
#include "slu/interaction_model.hpp"
#include "slu/model_store.hpp"
#include "slu/nlu_engine.hpp"
#include "slu/text.hpp"

namespace py = pybind11;

namespace {

slu::InteractionModel model_from_dir(const std::string& dir) {
  return slu::load_model_dir(dir).model;
}

std::vector<std::pair<std::string, std::string>> validate_dir(const std::string& dir) {
  slu::InteractionModel model = model_from_dir(dir);
  slu::ValidationReport report =
      slu::validate_interaction_model(model, slu::BuiltinCatalog::bundled());
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& v : report.violations) out.emplace_back(v.location, v.message);
  return out;
}

class PyGrammar {
 public:
  explicit PyGrammar(slu::WeightedGrammar g) : g_(std::move(g)) {}

  static PyGrammar from_model_dir(const std::string& dir, const std::string& priors) {
    slu::PriorMode mode = priors == "empirical" ? slu::PriorMode::Empirical
                                                : slu::PriorMode::MaxEntropy;
    return PyGrammar(
        slu::build_grammar(model_from_dir(dir), slu::BuiltinCatalog::bundled(), mode));
  }

  size_t num_states() const { return g_.num_states(); }
  size_t num_arcs() const { return g_.num_arcs(); }
  size_t num_paths() const { return slu::count_paths(g_); }
  double stochasticity_gap() const { return slu::max_stochasticity_gap(g_); }

  std::optional<std::string> recognize(const std::string& text) const {
    auto frame = slu::recognize_deterministic(g_, slu::tokenize(text));
    if (!frame) return std::nullopt;
    return frame->to_json();
  }

  std::vector<std::pair<std::string, std::string>> sample(size_t n, uint64_t seed) const {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& s : slu::sample_utterances(g_, n, seed))
      out.emplace_back(slu::join(s.tokens), s.frame.to_json());
    return out;
  }

  std::vector<std::pair<std::string, std::string>> enumerate(size_t limit) const {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& p : slu::enumerate_paths(g_, limit))
      out.emplace_back(slu::join(p.tokens), p.frame.to_json());
    return out;
  }

  py::bytes to_bytes() const { return py::bytes(slu::grammar_to_bytes(g_)); }
  std::string to_text() const { return slu::grammar_to_text(g_); }

 private:
  slu::WeightedGrammar g_;
};

class PyEngine {
 public:
  explicit PyEngine(py::bytes bundle)
      : engine_(slu::bundle_from_bytes(std::string(bundle))) {}

  std::string understand(const std::string& text) const {
    return engine_.understand(text).to_json();
  }
  std::string skill_id() const { return engine_.bundle().skill_id; }
  uint64_t version() const { return engine_.bundle().version; }
  std::string content_digest() const { return engine_.bundle().content_digest(); }

 private:
  slu::NluEngine engine_;
};

py::bytes build_bundle(const std::string& model_dir, const std::string& skill_id,
                       const std::string& config_json, const std::string& executor) {
  slu::ModelDir loaded = slu::load_model_dir(model_dir);
  slu::BuildConfig config;
  if (!config_json.empty()) config.apply_json(config_json);
  std::string id = skill_id.empty() ? loaded.skill_id : skill_id;
  slu::BuildOutput out = slu::build_skill_bundle(loaded.model, id, config,
                                                 slu::ExecutorOptions::parse(executor));
  if (!out.report.ok())
    throw std::runtime_error("build failed:\n" + out.report.summary());
  return py::bytes(out.bundle_bytes);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Skill NLU toolkit: grammar recognizer, statistical models, build pipeline";

  m.def("tokenize", [](const std::string& s) { return slu::tokenize(s); },
        "Normalize and split an utterance");
  m.def("validate_model_dir", &validate_dir,
        "Validate a model directory; returns (location, message) violations");
  m.def("build_bundle", &build_bundle, py::arg("model_dir"), py::arg("skill_id") = "",
        py::arg("config_json") = "", py::arg("executor") = "local",
        "Run the full build recipe and return bundle bytes");

  py::class_<PyGrammar>(m, "Grammar")
      .def_static("from_model_dir", &PyGrammar::from_model_dir, py::arg("model_dir"),
                  py::arg("priors") = "uniform")
      .def("recognize", &PyGrammar::recognize,
           "Deterministic recognition; frame JSON or None")
      .def("sample", &PyGrammar::sample, py::arg("n"), py::arg("seed") = 42)
      .def("enumerate", &PyGrammar::enumerate, py::arg("limit") = 100000)
      .def("num_states", &PyGrammar::num_states)
      .def("num_arcs", &PyGrammar::num_arcs)
      .def("num_paths", &PyGrammar::num_paths)
      .def("stochasticity_gap", &PyGrammar::stochasticity_gap)
      .def("to_bytes", &PyGrammar::to_bytes)
      .def("to_text", &PyGrammar::to_text);

  py::class_<slu::BloomFilter>(m, "BloomFilter")
      .def(py::init([](const std::string& name, const std::vector<std::string>& values,
                       double fpr) { return slu::build_bloom_filter(name, values, fpr); }),
           py::arg("name"), py::arg("values"), py::arg("target_fpr") = 0.01)
      .def("contains",
           [](const slu::BloomFilter& f, const std::string& phrase) {
             return slu::gazetteer_contains(f, slu::normalize(phrase));
           })
      .def_property_readonly("bits", &slu::BloomFilter::bit_count)
      .def_property_readonly("hashes", &slu::BloomFilter::hash_count)
      .def_property_readonly("name", &slu::BloomFilter::name);

  py::class_<PyEngine>(m, "Engine")
      .def(py::init<py::bytes>(), py::arg("bundle_bytes"))
      .def("understand", &PyEngine::understand, "NLU result JSON for an utterance")
      .def_property_readonly("skill_id", &PyEngine::skill_id)
      .def_property_readonly("version", &PyEngine::version)
      .def_property_readonly("content_digest", &PyEngine::content_digest);

  py::class_<slu::ModelStore>(m, "ModelStore")
      .def(py::init<std::filesystem::path>())
      .def("store",
           [](slu::ModelStore& s, py::bytes bundle) {
             return s.store(std::string(bundle));
           })
      .def("load_bytes",
           [](const slu::ModelStore& s, const std::string& skill) {
             return py::bytes(s.load_bytes(skill));
           })
      .def("skills", &slu::ModelStore::skills)
      .def("latest_version", &slu::ModelStore::latest_version);
}
