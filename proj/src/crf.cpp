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

#include "slu/crf.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <set>

#include "slu/io.hpp"
#include "slu/text.hpp"
#include "sgd_common.hpp"

namespace slu {

namespace {

constexpr double kLogZero = -1e30;

double log_sum_exp(const std::vector<double>& v) {
  double m = kLogZero;
  for (double x : v) m = std::max(m, x);
  if (m <= kLogZero) return kLogZero;
  double s = 0;
  for (double x : v)
    if (x > kLogZero) s += std::exp(x - m);
  return m + std::log(s);
}

}  // namespace

BioLabels::BioLabels(const std::vector<std::string>& slot_names) {
  labels_.push_back("O");
  std::set<std::string> sorted(slot_names.begin(), slot_names.end());
  for (const auto& slot : sorted) {
    labels_.push_back("B-" + slot);
    labels_.push_back("I-" + slot);
  }
  for (size_t i = 0; i < labels_.size(); ++i) index_[labels_[i]] = i;
}

BioLabels BioLabels::from_labels(std::vector<std::string> labels) {
  BioLabels out;
  out.labels_ = std::move(labels);
  for (size_t i = 0; i < out.labels_.size(); ++i) out.index_[out.labels_[i]] = i;
  return out;
}

size_t BioLabels::index(std::string_view label) const {
  auto it = index_.find(std::string(label));
  if (it == index_.end()) throw ModelError("unknown BIO label: " + std::string(label));
  return it->second;
}

bool BioLabels::is_inside(size_t i) const { return labels_[i].starts_with("I-"); }

size_t BioLabels::begin_variant(size_t i) const {
  if (!is_inside(i)) return i;
  return index("B-" + labels_[i].substr(2));
}

bool BioLabels::transition_allowed(size_t from, size_t to) const {
  if (!is_inside(to)) return true;
  const std::string& suffix = labels_[to].substr(2);
  const std::string& f = labels_[from];
  return (f.starts_with("B-") || f.starts_with("I-")) && f.substr(2) == suffix;
}

// --- scoring -----------------------------------------------------------------

namespace {

double emission_score(const CrfModel& model, size_t label, const FeatureVector& fv) {
  if (fv.dimension > model.dimension)
    throw ModelError("feature vector dimension exceeds model dimension");
  const double* row = model.emissions.data() + label * model.dimension;
  double s = 0;
  for (const auto& [id, value] : fv.entries) s += row[id] * value;
  return s;
}

// emissions[t][l]
std::vector<std::vector<double>> emission_table(
    const CrfModel& model, const std::vector<FeatureVector>& features) {
  size_t T = features.size();
  size_t L = model.labels.size();
  std::vector<std::vector<double>> em(T, std::vector<double>(L));
  for (size_t t = 0; t < T; ++t)
    for (size_t l = 0; l < L; ++l) em[t][l] = emission_score(model, l, features[t]);
  return em;
}

struct ForwardBackward {
  std::vector<std::vector<double>> alpha;
  std::vector<std::vector<double>> beta;
  double logZ;
};

ForwardBackward forward_backward(const CrfModel& model,
                                 const std::vector<std::vector<double>>& em) {
  size_t T = em.size();
  size_t L = model.labels.size();
  ForwardBackward fb;
  fb.alpha.assign(T, std::vector<double>(L, kLogZero));
  fb.beta.assign(T, std::vector<double>(L, kLogZero));

  for (size_t l = 0; l < L; ++l) fb.alpha[0][l] = em[0][l];
  std::vector<double> acc(L);
  for (size_t t = 1; t < T; ++t) {
    for (size_t l = 0; l < L; ++l) {
      for (size_t p = 0; p < L; ++p) {
        double tr = model.transition(p, l);
        acc[p] = tr <= kLogZero ? kLogZero : fb.alpha[t - 1][p] + tr;
      }
      fb.alpha[t][l] = log_sum_exp(acc) + em[t][l];
    }
  }

  for (size_t l = 0; l < L; ++l) fb.beta[T - 1][l] = 0.0;
  for (size_t t = T - 1; t > 0; --t) {
    for (size_t p = 0; p < L; ++p) {
      for (size_t l = 0; l < L; ++l) {
        double tr = model.transition(p, l);
        acc[l] = tr <= kLogZero ? kLogZero : tr + em[t][l] + fb.beta[t][l];
      }
      fb.beta[t - 1][p] = log_sum_exp(acc);
    }
  }

  fb.logZ = log_sum_exp(fb.alpha[T - 1]);
  return fb;
}

}  // namespace

double crf_logZ(const CrfModel& model, const std::vector<FeatureVector>& features) {
  if (features.empty()) throw ModelError("empty sequence");
  auto em = emission_table(model, features);
  return forward_backward(model, em).logZ;
}

std::vector<std::vector<double>> crf_marginals(
    const CrfModel& model, const std::vector<FeatureVector>& features) {
  if (features.empty()) throw ModelError("empty sequence");
  auto em = emission_table(model, features);
  auto fb = forward_backward(model, em);
  size_t T = features.size();
  size_t L = model.labels.size();
  std::vector<std::vector<double>> marg(T, std::vector<double>(L, 0.0));
  for (size_t t = 0; t < T; ++t)
    for (size_t l = 0; l < L; ++l) {
      double lp = fb.alpha[t][l] + fb.beta[t][l] - fb.logZ;
      marg[t][l] = lp <= kLogZero ? 0.0 : std::exp(lp);
    }
  return marg;
}

std::pair<double, CrfGradient> crf_loglik_grad(const CrfModel& model,
                                               const VectorSequence& example) {
  size_t T = example.features.size();
  if (T == 0) throw ModelError("empty sequence");
  if (example.labels.size() != T) throw ModelError("label/feature length mismatch");
  size_t L = model.labels.size();

  std::vector<size_t> gold(T);
  for (size_t t = 0; t < T; ++t) gold[t] = model.labels.index(example.labels[t]);
  for (size_t t = 0; t + 1 < T; ++t)
    if (!model.labels.transition_allowed(gold[t], gold[t + 1]))
      throw ModelError("illegal gold transition " + model.labels.name(gold[t]) +
                       " -> " + model.labels.name(gold[t + 1]));
  if (model.labels.is_inside(gold[0]))
    throw ModelError("illegal gold sequence: starts with " + model.labels.name(gold[0]));

  auto em = emission_table(model, example.features);
  auto fb = forward_backward(model, em);

  // gold path score
  double gold_score = 0;
  for (size_t t = 0; t < T; ++t) gold_score += em[t][gold[t]];
  for (size_t t = 0; t + 1 < T; ++t) gold_score += model.transition(gold[t], gold[t + 1]);
  double loglik = gold_score - fb.logZ;

  CrfGradient grad;
  grad.transitions.assign(L * L, 0.0);

  // d loglik / dw = observed - expected
  for (size_t t = 0; t < T; ++t) {
    for (size_t l = 0; l < L; ++l) {
      double lp = fb.alpha[t][l] + fb.beta[t][l] - fb.logZ;
      double m = lp <= kLogZero ? 0.0 : std::exp(lp);
      double coeff = (l == gold[t] ? 1.0 : 0.0) - m;
      if (coeff == 0) continue;
      for (const auto& [id, value] : example.features[t].entries)
        grad.emissions[uint64_t(l) * model.dimension + id] += coeff * value;
    }
  }
  for (size_t t = 0; t + 1 < T; ++t) {
    for (size_t a = 0; a < L; ++a) {
      for (size_t b = 0; b < L; ++b) {
        double tr = model.transition(a, b);
        if (tr <= kLogZero) continue;  // banned: no mass, no gradient
        double lp = fb.alpha[t][a] + tr + em[t + 1][b] + fb.beta[t + 1][b] - fb.logZ;
        double m = lp <= kLogZero ? 0.0 : std::exp(lp);
        double observed = (gold[t] == a && gold[t + 1] == b) ? 1.0 : 0.0;
        grad.transitions[a * L + b] += observed - m;
      }
    }
  }
  return {loglik, std::move(grad)};
}

std::pair<std::vector<std::string>, double> viterbi_decode(
    const CrfModel& model, const std::vector<FeatureVector>& features) {
  size_t T = features.size();
  if (T == 0) throw ModelError("empty sequence");
  size_t L = model.labels.size();
  auto em = emission_table(model, features);

  std::vector<std::vector<double>> delta(T, std::vector<double>(L, kLogZero));
  std::vector<std::vector<size_t>> back(T, std::vector<size_t>(L, 0));
  for (size_t l = 0; l < L; ++l) delta[0][l] = em[0][l];
  for (size_t t = 1; t < T; ++t) {
    for (size_t l = 0; l < L; ++l) {
      double best = kLogZero;
      size_t best_p = 0;
      bool found = false;
      for (size_t p = 0; p < L; ++p) {
        double tr = model.transition(p, l);
        if (tr <= kLogZero || delta[t - 1][p] <= kLogZero) continue;
        double s = delta[t - 1][p] + tr;
        if (!found || s > best) {  // strict: ties keep the lowest index
          best = s;
          best_p = p;
          found = true;
        }
      }
      if (found) {
        delta[t][l] = best + em[t][l];
        back[t][l] = best_p;
      }
    }
  }

  double best = kLogZero;
  size_t best_l = 0;
  for (size_t l = 0; l < L; ++l) {
    if (delta[T - 1][l] > best) {
      best = delta[T - 1][l];
      best_l = l;
    }
  }
  std::vector<std::string> out(T);
  size_t cur = best_l;
  for (size_t t = T; t-- > 0;) {
    out[t] = model.labels.name(cur);
    if (t > 0) cur = back[t][cur];
  }
  return {std::move(out), best};
}

// --- training -----------------------------------------------------------------

CrfModel train_crf(const std::vector<NamedSequence>& dataset, const TrainConfig& config,
                   const std::vector<std::string>& extra_slots) {
  if (dataset.empty()) throw ModelError("empty training set");

  std::set<std::string> slots(extra_slots.begin(), extra_slots.end());
  for (const auto& seq : dataset) {
    if (seq.features.size() != seq.labels.size())
      throw ModelError("label/feature length mismatch");
    if (seq.features.empty()) throw ModelError("empty sequence");
    for (const auto& l : seq.labels) {
      if (l == "O") continue;
      if (l.size() < 3 || (l[0] != 'B' && l[0] != 'I') || l[1] != '-')
        throw ModelError("bad BIO label: " + l);
      slots.insert(l.substr(2));
    }
  }

  CrfModel model;
  model.labels = BioLabels(std::vector<std::string>(slots.begin(), slots.end()));
  model.dimension = config.hash.dimension();
  model.hash = config.hash;
  size_t L = model.labels.size();
  size_t D = model.dimension;
  model.emissions.assign(L * D, 0.0);
  model.transitions.assign(L * L, 0.0);
  for (size_t a = 0; a < L; ++a)
    for (size_t b = 0; b < L; ++b)
      if (!model.labels.transition_allowed(a, b)) model.transitions[a * L + b] = kWeightNegInf;

  ElasticNetSgd em_reg(model.emissions, config.l1, config.l2);
  ElasticNetSgd tr_reg(model.transitions, config.l1, config.l2);

  Rng rng(config.seed);
  double horizon = config.decay_horizon > 0 ? config.decay_horizon : double(dataset.size());
  std::vector<size_t> order(dataset.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  uint64_t step = 0;
  for (uint32_t epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    for (size_t idx : order) {
      const NamedSequence& seq = dataset[idx];
      VectorSequence ex;
      ex.labels = seq.labels;
      ex.features.reserve(seq.features.size());
      for (const auto& fs : seq.features) {
        if (config.knowledge_dropout > 0) {
          ex.features.push_back(
              hash_features(apply_knowledge_dropout(fs, config.knowledge_dropout, rng),
                            config.hash));
        } else {
          ex.features.push_back(hash_features(fs, config.hash));
        }
      }

      double eta = inverse_time_eta(config.learning_rate, double(step), horizon);

      // catch up every coordinate this example can touch
      for (const auto& fv : ex.features)
        for (const auto& [id, value] : fv.entries) {
          (void)value;
          for (size_t l = 0; l < L; ++l) em_reg.catch_up(l * D + id);
        }
      for (size_t a = 0; a < L; ++a)
        for (size_t b = 0; b < L; ++b)
          if (model.labels.transition_allowed(a, b)) tr_reg.catch_up(a * L + b);

      auto [loglik, grad] = crf_loglik_grad(model, ex);
      (void)loglik;
      for (const auto& [coord, g] : grad.emissions)
        model.emissions[coord] += eta * g;  // ascend loglik = descend NLL
      for (size_t a = 0; a < L; ++a)
        for (size_t b = 0; b < L; ++b) {
          if (!model.labels.transition_allowed(a, b)) continue;
          model.transitions[a * L + b] += eta * grad.transitions[a * L + b];
        }

      em_reg.advance(eta);
      tr_reg.advance(eta);
      for (const auto& fv : ex.features)
        for (const auto& [id, value] : fv.entries) {
          (void)value;
          for (size_t l = 0; l < L; ++l) em_reg.catch_up(l * D + id);
        }
      for (size_t a = 0; a < L; ++a)
        for (size_t b = 0; b < L; ++b)
          if (model.labels.transition_allowed(a, b)) tr_reg.catch_up(a * L + b);
      ++step;
    }
  }
  em_reg.finalize();
  // banned transitions must stay pinned; finalize only the legal ones
  for (size_t a = 0; a < L; ++a)
    for (size_t b = 0; b < L; ++b)
      if (model.labels.transition_allowed(a, b)) tr_reg.catch_up(a * L + b);
  return model;
}

// --- frames ---------------------------------------------------------------------

std::vector<std::string> bio_tags_from_frame(const SemanticFrame& frame, size_t n_tokens) {
  std::vector<std::string> tags(n_tokens, "O");
  for (const auto& [name, fill] : frame.slots) {
    for (uint32_t i = fill.begin; i < fill.end && i < n_tokens; ++i)
      tags[i] = (i == fill.begin ? "B-" : "I-") + name;
  }
  return tags;
}

SemanticFrame decode_frame(const std::vector<std::string>& tokens,
                           const std::vector<std::string>& bio_labels,
                           const std::string& intent) {
  if (tokens.size() != bio_labels.size())
    throw ModelError("decode_frame: length mismatch");
  SemanticFrame frame;
  frame.intent = intent;
  frame.source = FrameSource::Statistical;

  size_t i = 0;
  while (i < tokens.size()) {
    const std::string& tag = bio_labels[i];
    if (tag == "O") {
      ++i;
      continue;
    }
    // orphan I-x acts as B-x
    std::string slot = tag.substr(2);
    size_t begin = i;
    ++i;
    while (i < tokens.size() && bio_labels[i] == "I-" + slot) ++i;
    SlotFill fill;
    fill.begin = uint32_t(begin);
    fill.end = uint32_t(i);
    std::vector<std::string> span(tokens.begin() + begin, tokens.begin() + i);
    fill.value = join(span);
    frame.slots[slot] = std::move(fill);
  }
  return frame;
}

// --- serialization ---------------------------------------------------------------

std::string CrfModel::to_bytes() const {
  BinaryWriter w;
  w.bytes("CRF1");
  w.u32(uint32_t(labels.size()));
  for (const auto& l : labels.names()) w.str(l);
  w.u32(dimension);
  w.u32(hash.bits);
  w.u64(hash.seed);
  for (double v : emissions) {
    float f = float(v);
    uint32_t bits;
    std::memcpy(&bits, &f, 4);
    w.u32(bits);
  }
  for (double v : transitions) w.f64(v);  // keep sentinels exact
  return w.take();
}

CrfModel CrfModel::from_bytes(std::string_view bytes) {
  BinaryReader r(bytes);
  if (r.bytes(4) != "CRF1") throw ModelError("bad tagger image");
  CrfModel m;
  uint32_t n = r.u32();
  std::vector<std::string> names;
  for (uint32_t i = 0; i < n; ++i) names.push_back(r.str());
  m.labels = BioLabels::from_labels(std::move(names));
  m.dimension = r.u32();
  m.hash.bits = r.u32();
  m.hash.seed = r.u64();
  size_t ne = size_t(n) * m.dimension;
  m.emissions.resize(ne);
  for (size_t i = 0; i < ne; ++i) {
    uint32_t bits = r.u32();
    float f;
    std::memcpy(&f, &bits, 4);
    m.emissions[i] = double(f);
  }
  m.transitions.resize(size_t(n) * n);
  for (auto& v : m.transitions) v = r.f64();
  return m;
}

QuantizedCrf quantize_model(const CrfModel& model) {
  QuantizedCrf q;
  q.labels = model.labels;
  q.dimension = model.dimension;
  q.hash = model.hash;
  q.emissions =
      quantize_rows(model.emissions, uint32_t(model.labels.size()), model.dimension);
  size_t L = model.labels.size();
  std::vector<bool> banned(L * L, false);
  for (size_t a = 0; a < L; ++a)
    for (size_t b = 0; b < L; ++b)
      banned[a * L + b] = !model.labels.transition_allowed(a, b);
  q.transitions = quantize_rows(model.transitions, uint32_t(L), uint32_t(L), banned);
  return q;
}

CrfModel dequantize_model(const QuantizedCrf& q) {
  CrfModel m;
  m.labels = q.labels;
  m.dimension = q.dimension;
  m.hash = q.hash;
  m.emissions = dequantize(q.emissions);
  m.transitions = dequantize(q.transitions);
  return m;
}

std::string QuantizedCrf::to_bytes() const {
  BinaryWriter w;
  w.bytes("CRQ1");
  w.u32(uint32_t(labels.size()));
  for (const auto& l : labels.names()) w.str(l);
  w.u32(dimension);
  w.u32(hash.bits);
  w.u64(hash.seed);
  w.str(emissions.to_bytes());
  w.str(transitions.to_bytes());
  return w.take();
}

QuantizedCrf QuantizedCrf::from_bytes(std::string_view bytes) {
  BinaryReader r(bytes);
  if (r.bytes(4) != "CRQ1") throw ModelError("bad quantized tagger image");
  QuantizedCrf q;
  uint32_t n = r.u32();
  std::vector<std::string> names;
  for (uint32_t i = 0; i < n; ++i) names.push_back(r.str());
  q.labels = BioLabels::from_labels(std::move(names));
  q.dimension = r.u32();
  q.hash.bits = r.u32();
  q.hash.seed = r.u64();
  q.emissions = QuantizedMatrix::from_bytes(r.str());
  q.transitions = QuantizedMatrix::from_bytes(r.str());
  return q;
}

}  // namespace slu
