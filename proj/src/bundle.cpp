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

#include "slu/bundle.hpp"

#include <map>

#include <json.hpp>

#include "slu/hashing.hpp"
#include "slu/io.hpp"

namespace slu {

using nlohmann::json;

std::string NluConfig::to_json() const {
  return json{{"rejection_threshold", rejection_threshold}, {"slots_first", slots_first}}
      .dump();
}

NluConfig NluConfig::from_json(std::string_view text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw BundleError("malformed nlu config");
  NluConfig c;
  c.rejection_threshold = j.value("rejection_threshold", 0.35);
  c.slots_first = j.value("slots_first", false);
  return c;
}

namespace {

constexpr char kMagic[4] = {'S', 'L', 'U', 'B'};
constexpr uint32_t kVersion = 1;

struct Section {
  std::string name;
  std::string payload;
};

std::string gazetteers_to_bytes(const std::vector<BloomFilter>& filters) {
  BinaryWriter w;
  w.u32(uint32_t(filters.size()));
  for (const auto& f : filters) w.str(f.to_bytes());
  return w.take();
}

std::vector<BloomFilter> gazetteers_from_bytes(std::string_view bytes) {
  BinaryReader r(bytes);
  uint32_t n = r.u32();
  std::vector<BloomFilter> out;
  out.reserve(n);
  for (uint32_t i = 0; i < n; ++i) out.push_back(BloomFilter::from_bytes(r.str()));
  return out;
}

// Content digest covers every section except build metadata.
std::string digest_sections(const std::vector<Section>& sections) {
  Sha256 h;
  for (const auto& s : sections) {
    if (s.name == "meta") continue;
    h.update(s.name);
    h.update(sha256_hex(s.payload));
  }
  return to_hex(h.finish());
}

}  // namespace

std::string SkillModelBundle::content_digest() const {
  // serialize and reuse the canonical section digesting
  std::string bytes = bundle_to_bytes(*this);
  return bundle_info(bytes).content_digest;
}

std::string bundle_to_bytes(const SkillModelBundle& bundle) {
  std::vector<Section> sections;
  sections.push_back({"model", model_to_json(bundle.model)});
  sections.push_back({"grammar", grammar_to_bytes(bundle.grammar)});
  sections.push_back({"gazetteers", gazetteers_to_bytes(bundle.gazetteers)});
  sections.push_back({"intent_model", bundle.intent_model.to_bytes()});
  sections.push_back({"slot_model", bundle.slot_model.to_bytes()});
  sections.push_back({"nlu_config", bundle.nlu.to_json()});

  json meta{{"skill_id", bundle.skill_id},
            {"version", bundle.version},
            {"created_unix_ms", bundle.created_unix_ms},
            {"config_digest", bundle.config_digest},
            {"invocation_name", bundle.model.invocation_name}};
  sections.push_back({"meta", meta.dump()});

  BinaryWriter w;
  w.bytes(std::string_view(kMagic, 4));
  w.u32(kVersion);
  w.str(bundle.skill_id);
  w.u64(bundle.version);
  w.str(digest_sections(sections));
  w.u32(uint32_t(sections.size()));
  for (const auto& s : sections) {
    w.str(s.name);
    w.str(sha256_hex(s.payload));
    w.str(s.payload);
  }
  return w.take();
}

namespace {

std::map<std::string, std::string> read_sections(std::string_view bytes,
                                                 std::string* skill_id,
                                                 uint64_t* version,
                                                 std::string* content_digest) {
  try {
    BinaryReader r(bytes);
    if (r.bytes(4) != std::string(kMagic, 4)) throw BundleError("bad bundle magic");
    uint32_t v = r.u32();
    if (v != kVersion) throw BundleError("unsupported bundle version " + std::to_string(v));
    *skill_id = r.str();
    *version = r.u64();
    *content_digest = r.str();
    uint32_t n = r.u32();
    std::map<std::string, std::string> sections;
    std::vector<Section> ordered;
    for (uint32_t i = 0; i < n; ++i) {
      std::string name = r.str();
      std::string digest = r.str();
      std::string payload = r.str();
      if (sha256_hex(payload) != digest)
        throw BundleError("bundle digest mismatch in section " + name);
      ordered.push_back({name, payload});
      sections[name] = std::move(payload);
    }
    if (digest_sections(ordered) != *content_digest)
      throw BundleError("bundle content digest mismatch");
    return sections;
  } catch (const IoError& e) {
    throw BundleError(std::string("truncated bundle: ") + e.what());
  }
}

}  // namespace

SkillModelBundle bundle_from_bytes(std::string_view bytes) {
  SkillModelBundle b;
  std::string content_digest;
  auto sections = read_sections(bytes, &b.skill_id, &b.version, &content_digest);
  auto need = [&](const char* name) -> const std::string& {
    auto it = sections.find(name);
    if (it == sections.end())
      throw BundleError(std::string("bundle missing section ") + name);
    return it->second;
  };
  b.model = model_from_json(need("model"));
  b.grammar = grammar_from_bytes(need("grammar"));
  b.gazetteers = gazetteers_from_bytes(need("gazetteers"));
  b.intent_model = QuantizedMaxEnt::from_bytes(need("intent_model"));
  b.slot_model = QuantizedCrf::from_bytes(need("slot_model"));
  b.nlu = NluConfig::from_json(need("nlu_config"));
  json meta = json::parse(need("meta"));
  b.created_unix_ms = meta.value("created_unix_ms", uint64_t(0));
  b.config_digest = meta.value("config_digest", std::string());
  return b;
}

BundleInfo bundle_info(std::string_view bytes) {
  BundleInfo info;
  auto sections = read_sections(bytes, &info.skill_id, &info.version, &info.content_digest);
  auto it = sections.find("meta");
  if (it != sections.end()) {
    json meta = json::parse(it->second, nullptr, false);
    if (!meta.is_discarded()) {
      info.created_unix_ms = meta.value("created_unix_ms", uint64_t(0));
      info.invocation_name = meta.value("invocation_name", std::string());
    }
  }
  return info;
}

}  // namespace slu
