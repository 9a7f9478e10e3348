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
#include <vector>

#include "slu/feature_extraction.hpp"
#include "slu/quantize.hpp"

namespace slu {

class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Optimizer settings shared by the classifier and the tagger. Stochastic
// subgradient with inverse-time decay eta_t = eta0 / (1 + t/T); L1 uses
// cumulative-penalty truncation so exact zeros occur.
struct TrainConfig {
  uint32_t epochs = 12;
  double learning_rate = 0.25;  // eta0
  double decay_horizon = 0;     // T; 0 means the dataset size
  double l1 = 1e-7;
  double l2 = 1e-6;
  double knowledge_dropout = 0.1;
  HashConfig hash;
  uint64_t seed = 1;
};

struct MaxEntModel {
  std::vector<std::string> labels;
  uint32_t dimension = 0;
  HashConfig hash;                // indexing scheme of inputs
  std::vector<double> weights;    // labels x dimension, row-major

  size_t label_index(std::string_view label) const;  // throws on unknown

  std::string to_bytes() const;   // float32 weights
  static MaxEntModel from_bytes(std::string_view bytes);
};

struct QuantizedMaxEnt {
  std::vector<std::string> labels;
  uint32_t dimension = 0;
  HashConfig hash;
  QuantizedMatrix weights;

  std::string to_bytes() const;
  static QuantizedMaxEnt from_bytes(std::string_view bytes);
};

// Labeled example with pre-indexed features (the spec-level dataset form).
struct VectorExample {
  FeatureVector features;
  std::string label;
};

// Labeled example with named features; knowledge dropout and hashing are
// applied per epoch inside the trainer.
struct NamedExample {
  FeatureSet features;
  std::string label;
};

// Minimizes NLL + l2*|w|^2 + l1*|w|_1 by seeded stochastic subgradient with
// per-epoch shuffling. `extra_labels` forces rows for labels the dataset
// must cover; a forced label with zero examples is an error.
MaxEntModel train_maxent(const std::vector<VectorExample>& dataset,
                         const TrainConfig& config,
                         const std::vector<std::string>& extra_labels = {});

// Same optimizer, but re-extracts per epoch: applies knowledge dropout to
// `in-cluster:*` features, then hashes with config.hash.
MaxEntModel train_maxent_named(const std::vector<NamedExample>& dataset,
                               const TrainConfig& config,
                               const std::vector<std::string>& extra_labels = {});

// Softmax over w.x; probabilities sum to 1.
std::vector<double> predict_intent(const MaxEntModel& model, const FeatureVector& fv);

// Full-batch regularized objective, for convergence checks.
double maxent_objective(const MaxEntModel& model,
                        const std::vector<VectorExample>& dataset, double l1,
                        double l2);

// NLL gradient on a single example (no regularizer), for gradient checks.
std::vector<double> maxent_nll_gradient(const MaxEntModel& model,
                                        const VectorExample& example);
double maxent_nll(const MaxEntModel& model, const VectorExample& example);

QuantizedMaxEnt quantize_model(const MaxEntModel& model);
MaxEntModel dequantize_model(const QuantizedMaxEnt& q);

}  // namespace slu
