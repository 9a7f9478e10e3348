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
//
// Test-only oracles. Everything here recomputes expected values from first
// principles, independent of the library code paths under test.

#pragma once

#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "slu/crf.hpp"
#include "slu/interaction_model.hpp"
#include "slu/rng.hpp"
#include "slu/text.hpp"
#include "slu/semantic_frame.hpp"

namespace slu::oracle {

// --- template expansion -------------------------------------------------------

struct Expansion {
  std::vector<std::string> tokens;
  SemanticFrame frame;
  double probability = 0;  // under uniform intent/template/value priors
};

// Expands every sample template against the slot type values by direct
// cartesian product. No FST involved.
inline std::vector<Expansion> expand_model(const InteractionModel& model,
                                           const BuiltinCatalog& builtins) {
  // unique templates per intent, declaration order
  std::map<std::string, std::vector<const LabeledUtterance*>> per_intent;
  std::vector<std::string> intent_order;
  for (const auto& sample : model.samples) {
    auto& bucket = per_intent[sample.intent];
    bool dup = false;
    for (const auto* seen : bucket)
      if (seen->tokens == sample.tokens) dup = true;
    if (!dup) {
      if (bucket.empty()) intent_order.push_back(sample.intent);
      bucket.push_back(&sample);
    }
  }

  std::vector<Expansion> out;
  double p_intent = 1.0 / double(per_intent.size());
  for (const auto& intent : intent_order) {
    const auto& templates = per_intent.at(intent);
    double p_template = p_intent / double(templates.size());
    for (const auto* tmpl : templates) {
      // collect slot positions and value lists
      std::vector<size_t> slot_positions;
      std::vector<const CustomSlotType*> slot_types;
      for (size_t i = 0; i < tmpl->tokens.size(); ++i) {
        if (!tmpl->tokens[i].is_slot()) continue;
        const IntentDecl* decl = model.schema.find_intent(intent);
        const SlotDecl* slot = decl->find_slot(tmpl->tokens[i].text);
        slot_positions.push_back(i);
        slot_types.push_back(resolve_slot_type(model, builtins, slot->type));
      }

      std::vector<size_t> choice(slot_positions.size(), 0);
      while (true) {
        Expansion e;
        e.frame.intent = intent;
        e.frame.confidence = 1.0;
        e.frame.source = FrameSource::Deterministic;
        double p = p_template;
        size_t slot_i = 0;
        for (size_t i = 0; i < tmpl->tokens.size(); ++i) {
          const auto& tok = tmpl->tokens[i];
          if (!tok.is_slot()) {
            e.tokens.push_back(tok.text);
            continue;
          }
          const CustomSlotType* type = slot_types[slot_i];
          const std::string& value = type->values[choice[slot_i]];
          p /= double(type->values.size());
          uint32_t begin = uint32_t(e.tokens.size());
          for (const auto& vt : tokenize(value)) e.tokens.push_back(vt);
          e.frame.slots[tok.text] =
              SlotFill{join(std::vector<std::string>(e.tokens.begin() + begin,
                                                     e.tokens.end())),
                       begin, uint32_t(e.tokens.size())};
          ++slot_i;
        }
        e.probability = p;
        out.push_back(std::move(e));

        // odometer over value choices
        size_t k = 0;
        for (; k < choice.size(); ++k) {
          if (++choice[k] < slot_types[k]->values.size()) break;
          choice[k] = 0;
        }
        if (k == choice.size() && !choice.empty()) break;
        if (choice.empty()) break;
      }
    }
  }
  return out;
}

// --- chi-square ---------------------------------------------------------------

// 0.999 quantiles of the chi-square distribution (standard table values);
// a statistic below the quantile passes a goodness-of-fit test at p > 0.001.
inline double chi_square_quantile_999(size_t df) {
  static const double table[] = {0,      10.828, 13.816, 16.266, 18.467,
                                 20.515, 22.458, 24.322, 26.124, 27.877};
  if (df == 0 || df > 9) throw std::out_of_range("df outside the frozen table");
  return table[df];
}

template <typename Counts, typename Expected>
double chi_square_statistic(const Counts& observed, const Expected& expected) {
  double stat = 0;
  for (size_t i = 0; i < observed.size(); ++i) {
    double diff = double(observed[i]) - expected[i];
    stat += diff * diff / expected[i];
  }
  return stat;
}

// --- brute-force CRF ------------------------------------------------------------

// Enumerates all |L|^T sequences, skipping banned transitions, and reduces
// with log-sum-exp. Mirrors the model scoring definition directly.
inline double brute_force_logZ(const CrfModel& model,
                               const std::vector<FeatureVector>& features) {
  size_t T = features.size();
  size_t L = model.labels.size();
  std::vector<std::vector<double>> em(T, std::vector<double>(L));
  for (size_t t = 0; t < T; ++t)
    for (size_t l = 0; l < L; ++l) {
      double s = 0;
      for (const auto& [id, value] : features[t].entries)
        s += model.emissions[l * model.dimension + id] * value;
      em[t][l] = s;
    }

  std::vector<size_t> seq(T, 0);
  double max_score = -1e300;
  std::vector<double> scores;
  while (true) {
    bool legal = true;
    for (size_t t = 0; t + 1 < T && legal; ++t)
      if (!model.labels.transition_allowed(seq[t], seq[t + 1])) legal = false;
    if (legal) {
      double s = 0;
      for (size_t t = 0; t < T; ++t) s += em[t][seq[t]];
      for (size_t t = 0; t + 1 < T; ++t) s += model.transition(seq[t], seq[t + 1]);
      scores.push_back(s);
      max_score = std::max(max_score, s);
    }
    size_t k = 0;
    for (; k < T; ++k) {
      if (++seq[k] < L) break;
      seq[k] = 0;
    }
    if (k == T) break;
  }
  double z = 0;
  for (double s : scores) z += std::exp(s - max_score);
  return max_score + std::log(z);
}

// Exhaustive argmax with the same tie-breaking contract as the decoder:
// the lexicographically smallest label-index sequence among maxima.
inline std::vector<std::string> brute_force_viterbi(
    const CrfModel& model, const std::vector<FeatureVector>& features) {
  size_t T = features.size();
  size_t L = model.labels.size();
  std::vector<std::vector<double>> em(T, std::vector<double>(L));
  for (size_t t = 0; t < T; ++t)
    for (size_t l = 0; l < L; ++l) {
      double s = 0;
      for (const auto& [id, value] : features[t].entries)
        s += model.emissions[l * model.dimension + id] * value;
      em[t][l] = s;
    }

  std::vector<size_t> seq(T, 0), best_seq;
  double best = -1e300;
  while (true) {
    bool legal = true;
    for (size_t t = 0; t + 1 < T && legal; ++t)
      if (!model.labels.transition_allowed(seq[t], seq[t + 1])) legal = false;
    if (legal) {
      double s = 0;
      for (size_t t = 0; t < T; ++t) s += em[t][seq[t]];
      for (size_t t = 0; t + 1 < T; ++t) s += model.transition(seq[t], seq[t + 1]);
      if (s > best + 1e-12 || best_seq.empty()) {
        best = s;
        best_seq = seq;
      }
      // ties: keep the earlier (lexicographically smaller) sequence, which
      // the row-major odometer visits first
    }
    size_t k = T;
    for (size_t i = T; i-- > 0;) {
      if (++seq[i] < L) {
        k = i;
        break;
      }
      seq[i] = 0;
    }
    if (k == T) break;
  }
  std::vector<std::string> out;
  for (size_t l : best_seq) out.push_back(model.labels.name(l));
  return out;
}

// --- misc ----------------------------------------------------------------------

// Random CRF with small dimensions for oracle comparisons.
inline CrfModel random_crf(Rng& rng, size_t n_slots, uint32_t dim_bits) {
  std::vector<std::string> slots;
  for (size_t i = 0; i < n_slots; ++i) slots.push_back("s" + std::to_string(i));
  CrfModel m;
  m.labels = BioLabels(slots);
  m.hash.bits = dim_bits;
  m.hash.seed = rng.next_u64();
  m.dimension = m.hash.dimension();
  size_t L = m.labels.size();
  m.emissions.resize(L * m.dimension);
  for (auto& w : m.emissions) w = rng.uniform() * 2.0 - 1.0;
  m.transitions.assign(L * L, 0.0);
  for (size_t a = 0; a < L; ++a)
    for (size_t b = 0; b < L; ++b)
      m.transitions[a * L + b] = m.labels.transition_allowed(a, b)
                                     ? rng.uniform() * 2.0 - 1.0
                                     : kWeightNegInf;
  return m;
}

inline std::vector<FeatureVector> random_feature_sequence(Rng& rng, size_t T,
                                                          uint32_t dim) {
  std::vector<FeatureVector> out(T);
  for (auto& fv : out) {
    fv.dimension = dim;
    std::set<uint32_t> ids;
    size_t n = 1 + rng.below(3);
    while (ids.size() < n) ids.insert(uint32_t(rng.below(dim)));
    for (uint32_t id : ids)
      fv.entries.push_back({id, rng.uniform() * 2.0 - 1.0});
  }
  return out;
}

}  // namespace slu::oracle
