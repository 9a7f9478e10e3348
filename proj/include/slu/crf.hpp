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
#include <string>
#include <unordered_map>
#include <vector>

#include "slu/feature_extraction.hpp"
#include "slu/maxent.hpp"  // ModelError, TrainConfig
#include "slu/semantic_frame.hpp"

namespace slu {

// BIO label set over slot names: index 0 is "O", then B-x/I-x pairs in
// sorted slot-name order.
class BioLabels {
 public:
  BioLabels() = default;
  explicit BioLabels(const std::vector<std::string>& slot_names);
  static BioLabels from_labels(std::vector<std::string> labels);

  size_t size() const { return labels_.size(); }
  const std::string& name(size_t i) const { return labels_.at(i); }
  const std::vector<std::string>& names() const { return labels_; }
  size_t index(std::string_view label) const;  // throws on unknown

  // I-x may only follow B-x or I-x.
  bool transition_allowed(size_t from, size_t to) const;
  bool is_inside(size_t i) const;  // I-x?
  // For I-x, the index of B-x; otherwise the label itself.
  size_t begin_variant(size_t i) const;

 private:
  std::vector<std::string> labels_;
  std::unordered_map<std::string, size_t> index_;
};

struct CrfModel {
  BioLabels labels;
  uint32_t dimension = 0;
  HashConfig hash;
  std::vector<double> emissions;    // labels x dimension, row-major
  std::vector<double> transitions;  // labels x labels; banned = kWeightNegInf

  double transition(size_t from, size_t to) const {
    return transitions[from * labels.size() + to];
  }

  std::string to_bytes() const;  // float32 weights
  static CrfModel from_bytes(std::string_view bytes);
};

struct QuantizedCrf {
  BioLabels labels;
  uint32_t dimension = 0;
  HashConfig hash;
  QuantizedMatrix emissions;
  QuantizedMatrix transitions;  // banned entries in the sentinel mask

  std::string to_bytes() const;
  static QuantizedCrf from_bytes(std::string_view bytes);
};

QuantizedCrf quantize_model(const CrfModel& model);
CrfModel dequantize_model(const QuantizedCrf& q);

// One training sequence with pre-indexed features per position.
struct VectorSequence {
  std::vector<FeatureVector> features;  // one per token
  std::vector<std::string> labels;      // gold BIO tags
};

// One training sequence with named features; dropout + hashing happen per
// epoch inside the trainer.
struct NamedSequence {
  std::vector<FeatureSet> features;
  std::vector<std::string> labels;
};

struct CrfGradient {
  // (label * dimension + feature id) -> d loglik / d w
  std::unordered_map<uint64_t, double> emissions;
  // dense labels x labels; banned entries stay 0
  std::vector<double> transitions;
};

// log P(y|x) and its gradient. logZ comes from the forward algorithm in
// log space; expectations from forward-backward.
std::pair<double, CrfGradient> crf_loglik_grad(const CrfModel& model,
                                               const VectorSequence& example);

double crf_logZ(const CrfModel& model, const std::vector<FeatureVector>& features);

// Per-position posterior marginals; rows sum to 1.
std::vector<std::vector<double>> crf_marginals(const CrfModel& model,
                                               const std::vector<FeatureVector>& features);

// Argmax label sequence. Ties break toward the lowest label index.
std::pair<std::vector<std::string>, double> viterbi_decode(
    const CrfModel& model, const std::vector<FeatureVector>& features);

// Stochastic subgradient on -loglik + elastic net, banned transitions
// pinned. Label set is the union of gold labels plus `extra_slots` B/I rows.
CrfModel train_crf(const std::vector<NamedSequence>& dataset, const TrainConfig& config,
                   const std::vector<std::string>& extra_slots = {});

// Gold BIO tags from a frame's slot spans.
std::vector<std::string> bio_tags_from_frame(const SemanticFrame& frame, size_t n_tokens);

// Spans from predicted tags; orphan I-x repairs to B-x.
SemanticFrame decode_frame(const std::vector<std::string>& tokens,
                           const std::vector<std::string>& bio_labels,
                           const std::string& intent);

}  // namespace slu
