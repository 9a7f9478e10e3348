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

#include "slu/model_store.hpp"

#include <algorithm>

#include "slu/io.hpp"
#include "slu/text.hpp"

namespace slu {

namespace fs = std::filesystem;

ModelStore::ModelStore(fs::path root) : root_(std::move(root)) {
  fs::create_directories(root_);
}

fs::path ModelStore::skill_dir(const std::string& skill_id) const {
  return root_ / skill_id;
}

uint64_t ModelStore::store(std::string_view bundle_bytes,
                           std::optional<uint64_t> version) {
  SkillModelBundle bundle = bundle_from_bytes(bundle_bytes);  // digest-checked
  if (bundle.skill_id.empty()) throw StoreError("bundle has no skill id");

  std::lock_guard lock(write_mutex_);
  uint64_t v = version.value_or(0);
  if (v == 0) {
    auto existing = versions(bundle.skill_id);
    v = existing.empty() ? 1 : existing.back() + 1;
  }
  bundle.version = v;  // the store owns version assignment
  fs::path dir = skill_dir(bundle.skill_id) / std::to_string(v);
  write_file_atomic(dir / "bundle.bin", bundle_to_bytes(bundle));
  // pointer flips only after the bundle is fully in place
  write_file_atomic(skill_dir(bundle.skill_id) / "latest", std::to_string(v));
  return v;
}

uint64_t ModelStore::latest_version(const std::string& skill_id) const {
  fs::path pointer = skill_dir(skill_id) / "latest";
  if (!fs::exists(pointer)) throw StoreError("unknown skill id: " + skill_id);
  try {
    return std::stoull(read_file(pointer));
  } catch (const std::exception&) {
    throw StoreError("corrupt latest pointer for skill " + skill_id);
  }
}

std::vector<uint64_t> ModelStore::versions(const std::string& skill_id) const {
  std::vector<uint64_t> out;
  fs::path dir = skill_dir(skill_id);
  if (!fs::is_directory(dir)) return out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_directory()) continue;
    try {
      out.push_back(std::stoull(entry.path().filename().string()));
    } catch (const std::exception&) {
      continue;  // not a version directory
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::string ModelStore::load_bytes(const std::string& skill_id,
                                   std::optional<uint64_t> version) const {
  uint64_t v = version ? *version : latest_version(skill_id);
  fs::path file = skill_dir(skill_id) / std::to_string(v) / "bundle.bin";
  if (!fs::exists(file))
    throw StoreError("version " + std::to_string(v) + " not found for skill " + skill_id);
  return read_file(file);
}

SkillModelBundle ModelStore::load(const std::string& skill_id,
                                  std::optional<uint64_t> version) const {
  return bundle_from_bytes(load_bytes(skill_id, version));
}

std::vector<std::string> ModelStore::skills() const {
  std::vector<std::string> out;
  if (!fs::is_directory(root_)) return out;
  for (const auto& entry : fs::directory_iterator(root_)) {
    if (entry.is_directory() && fs::exists(entry.path() / "latest"))
      out.push_back(entry.path().filename().string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::optional<std::string> ModelStore::find_by_invocation(
    const std::string& invocation) const {
  std::string wanted = normalize(invocation);
  for (const auto& skill : skills()) {
    try {
      BundleInfo info = bundle_info(load_bytes(skill));
      if (normalize(info.invocation_name) == wanted) return skill;
    } catch (const std::exception&) {
      continue;  // unreadable bundle should not break routing
    }
  }
  return std::nullopt;
}

}  // namespace slu
