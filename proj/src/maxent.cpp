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

#include "slu/maxent.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>
#include <map>
#include <set>

#include "slu/io.hpp"
#include "sgd_common.hpp"

namespace slu {

size_t MaxEntModel::label_index(std::string_view label) const {
  for (size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == label) return i;
  throw ModelError("unknown label: " + std::string(label));
}

namespace {

std::vector<double> raw_scores(const MaxEntModel& model, const FeatureVector& fv) {
  if (fv.dimension > model.dimension)
    throw ModelError("feature vector dimension exceeds model dimension");
  std::vector<double> scores(model.labels.size(), 0.0);
  for (size_t l = 0; l < scores.size(); ++l) {
    const double* row = model.weights.data() + l * model.dimension;
    double s = 0;
    for (const auto& [id, value] : fv.entries) {
      if (id >= model.dimension) throw ModelError("feature id out of range");
      s += row[id] * value;
    }
    scores[l] = s;
  }
  return scores;
}

std::vector<double> softmax(std::vector<double> scores) {
  double max_s = *std::max_element(scores.begin(), scores.end());
  double z = 0;
  for (double& s : scores) {
    s = std::exp(s - max_s);
    z += s;
  }
  for (double& s : scores) s /= z;
  return scores;
}

std::vector<std::string> build_label_table(const std::vector<std::string>& extra,
                                           const std::function<const std::string&(size_t)>& label_of,
                                           size_t n) {
  std::vector<std::string> labels;
  std::set<std::string> seen;
  for (const auto& l : extra)
    if (seen.insert(l).second) labels.push_back(l);
  for (size_t i = 0; i < n; ++i)
    if (seen.insert(label_of(i)).second) labels.push_back(label_of(i));
  return labels;
}

// Shared trainer. `featurize(index, epoch)` re-extracts per epoch (dropout
// happens there for the named-example path).
MaxEntModel train_impl(size_t n_examples,
                       const std::function<const std::string&(size_t)>& label_of,
                       const std::function<FeatureVector(size_t, uint32_t, Rng&)>& featurize,
                       uint32_t dimension, const TrainConfig& config,
                       const std::vector<std::string>& extra_labels) {
  if (n_examples == 0) throw ModelError("empty training set");

  MaxEntModel model;
  model.labels = build_label_table(extra_labels, label_of, n_examples);
  model.dimension = dimension;
  model.hash = config.hash;

  std::map<std::string, size_t> label_ids;
  std::vector<size_t> gold(n_examples);
  std::map<std::string, size_t> counts;
  for (size_t l = 0; l < model.labels.size(); ++l) label_ids[model.labels[l]] = l;
  for (size_t i = 0; i < n_examples; ++i) {
    gold[i] = label_ids.at(label_of(i));
    counts[label_of(i)]++;
  }
  for (const auto& l : model.labels)
    if (counts[l] == 0) throw ModelError("label has zero examples: " + l);

  size_t L = model.labels.size();
  size_t D = model.dimension;
  model.weights.assign(L * D, 0.0);
  ElasticNetSgd reg(model.weights, config.l1, config.l2);

  Rng rng(config.seed);
  double horizon = config.decay_horizon > 0 ? config.decay_horizon : double(n_examples);
  std::vector<size_t> order(n_examples);
  for (size_t i = 0; i < n_examples; ++i) order[i] = i;

  uint64_t step = 0;
  for (uint32_t epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    for (size_t idx : order) {
      FeatureVector fv = featurize(idx, epoch, rng);
      double eta = inverse_time_eta(config.learning_rate, double(step), horizon);

      for (const auto& [id, value] : fv.entries) {
        (void)value;
        for (size_t l = 0; l < L; ++l) reg.catch_up(l * D + id);
      }
      std::vector<double> scores(L, 0.0);
      for (size_t l = 0; l < L; ++l) {
        double s = 0;
        for (const auto& [id, value] : fv.entries) s += model.weights[l * D + id] * value;
        scores[l] = s;
      }
      std::vector<double> probs = softmax(std::move(scores));
      for (size_t l = 0; l < L; ++l) {
        double coeff = probs[l] - (l == gold[idx] ? 1.0 : 0.0);
        if (coeff == 0) continue;
        for (const auto& [id, value] : fv.entries)
          model.weights[l * D + id] -= eta * coeff * value;
      }
      reg.advance(eta);
      for (const auto& [id, value] : fv.entries) {
        (void)value;
        for (size_t l = 0; l < L; ++l) reg.catch_up(l * D + id);
      }
      ++step;
    }
  }
  reg.finalize();
  return model;
}

}  // namespace

MaxEntModel train_maxent(const std::vector<VectorExample>& dataset,
                         const TrainConfig& config,
                         const std::vector<std::string>& extra_labels) {
  uint32_t dim = 0;
  for (const auto& ex : dataset) dim = std::max(dim, ex.features.dimension);
  if (dim == 0) dim = config.hash.dimension();
  return train_impl(
      dataset.size(), [&](size_t i) -> const std::string& { return dataset[i].label; },
      [&](size_t i, uint32_t, Rng&) { return dataset[i].features; }, dim, config,
      extra_labels);
}

MaxEntModel train_maxent_named(const std::vector<NamedExample>& dataset,
                               const TrainConfig& config,
                               const std::vector<std::string>& extra_labels) {
  return train_impl(
      dataset.size(), [&](size_t i) -> const std::string& { return dataset[i].label; },
      [&](size_t i, uint32_t, Rng& rng) {
        if (config.knowledge_dropout > 0) {
          FeatureSet kept =
              apply_knowledge_dropout(dataset[i].features, config.knowledge_dropout, rng);
          return hash_features(kept, config.hash);
        }
        return hash_features(dataset[i].features, config.hash);
      },
      config.hash.dimension(), config, extra_labels);
}

std::vector<double> predict_intent(const MaxEntModel& model, const FeatureVector& fv) {
  return softmax(raw_scores(model, fv));
}

double maxent_nll(const MaxEntModel& model, const VectorExample& example) {
  std::vector<double> scores = raw_scores(model, example.features);
  size_t gold = model.label_index(example.label);
  double max_s = *std::max_element(scores.begin(), scores.end());
  double lse = 0;
  for (double s : scores) lse += std::exp(s - max_s);
  lse = max_s + std::log(lse);
  return lse - scores[gold];
}

std::vector<double> maxent_nll_gradient(const MaxEntModel& model,
                                        const VectorExample& example) {
  std::vector<double> probs = predict_intent(model, example.features);
  size_t gold = model.label_index(example.label);
  std::vector<double> grad(model.weights.size(), 0.0);
  for (size_t l = 0; l < model.labels.size(); ++l) {
    double coeff = probs[l] - (l == gold ? 1.0 : 0.0);
    for (const auto& [id, value] : example.features.entries)
      grad[l * model.dimension + id] += coeff * value;
  }
  return grad;
}

double maxent_objective(const MaxEntModel& model,
                        const std::vector<VectorExample>& dataset, double l1,
                        double l2) {
  if (dataset.empty()) throw ModelError("empty dataset");
  double nll = 0;
  for (const auto& ex : dataset) nll += maxent_nll(model, ex);
  nll /= double(dataset.size());
  double sq = 0, ab = 0;
  for (double w : model.weights) {
    sq += w * w;
    ab += std::abs(w);
  }
  return nll + l2 * sq + l1 * ab;
}

QuantizedMaxEnt quantize_model(const MaxEntModel& model) {
  QuantizedMaxEnt q;
  q.labels = model.labels;
  q.dimension = model.dimension;
  q.hash = model.hash;
  q.weights = quantize_rows(model.weights, uint32_t(model.labels.size()), model.dimension);
  return q;
}

MaxEntModel dequantize_model(const QuantizedMaxEnt& q) {
  MaxEntModel m;
  m.labels = q.labels;
  m.dimension = q.dimension;
  m.hash = q.hash;
  m.weights = dequantize(q.weights);
  return m;
}

// --- serialization -----------------------------------------------------------

namespace {
void write_common(BinaryWriter& w, const std::vector<std::string>& labels,
                  uint32_t dimension, const HashConfig& hash) {
  w.u32(uint32_t(labels.size()));
  for (const auto& l : labels) w.str(l);
  w.u32(dimension);
  w.u32(hash.bits);
  w.u64(hash.seed);
}

void read_common(BinaryReader& r, std::vector<std::string>& labels,
                 uint32_t& dimension, HashConfig& hash) {
  uint32_t n = r.u32();
  labels.clear();
  for (uint32_t i = 0; i < n; ++i) labels.push_back(r.str());
  dimension = r.u32();
  hash.bits = r.u32();
  hash.seed = r.u64();
}
}  // namespace

std::string MaxEntModel::to_bytes() const {
  BinaryWriter w;
  w.bytes("MEF1");
  write_common(w, labels, dimension, hash);
  for (double v : weights) {
    float f = float(v);
    uint32_t bits;
    std::memcpy(&bits, &f, 4);
    w.u32(bits);
  }
  return w.take();
}

MaxEntModel MaxEntModel::from_bytes(std::string_view bytes) {
  BinaryReader r(bytes);
  if (r.bytes(4) != "MEF1") throw ModelError("bad classifier image");
  MaxEntModel m;
  read_common(r, m.labels, m.dimension, m.hash);
  size_t n = size_t(m.labels.size()) * m.dimension;
  m.weights.resize(n);
  for (size_t i = 0; i < n; ++i) {
    uint32_t bits = r.u32();
    float f;
    std::memcpy(&f, &bits, 4);
    m.weights[i] = double(f);
  }
  return m;
}

std::string QuantizedMaxEnt::to_bytes() const {
  BinaryWriter w;
  w.bytes("MEQ1");
  write_common(w, labels, dimension, hash);
  w.str(weights.to_bytes());
  return w.take();
}

QuantizedMaxEnt QuantizedMaxEnt::from_bytes(std::string_view bytes) {
  BinaryReader r(bytes);
  if (r.bytes(4) != "MEQ1") throw ModelError("bad quantized classifier image");
  QuantizedMaxEnt q;
  read_common(r, q.labels, q.dimension, q.hash);
  q.weights = QuantizedMatrix::from_bytes(r.str());
  return q;
}

}  // namespace slu
