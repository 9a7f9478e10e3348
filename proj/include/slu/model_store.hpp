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
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "slu/bundle.hpp"

namespace slu {

class StoreError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Local key-value model store emulating the runtime store:
//   <root>/<skill-id>/<version>/bundle.bin
//   <root>/<skill-id>/latest          (pointer file, written atomically)
// Writes are serialized per process; readers polling during a store never
// observe a partial bundle.
class ModelStore {
 public:
  explicit ModelStore(std::filesystem::path root);

  // Stores bundle bytes under the next version (or the explicit one) and
  // flips the `latest` pointer. Returns the stored version.
  uint64_t store(std::string_view bundle_bytes,
                 std::optional<uint64_t> version = std::nullopt);

  // Latest when version omitted. Verifies bundle digests on read.
  SkillModelBundle load(const std::string& skill_id,
                        std::optional<uint64_t> version = std::nullopt) const;
  std::string load_bytes(const std::string& skill_id,
                         std::optional<uint64_t> version = std::nullopt) const;

  uint64_t latest_version(const std::string& skill_id) const;
  std::vector<uint64_t> versions(const std::string& skill_id) const;
  std::vector<std::string> skills() const;

  // Exact-match invocation-name routing ("open <name>").
  std::optional<std::string> find_by_invocation(const std::string& invocation) const;

  const std::filesystem::path& root() const { return root_; }

 private:
  std::filesystem::path skill_dir(const std::string& skill_id) const;
  std::filesystem::path root_;
  mutable std::mutex write_mutex_;
};

}  // namespace slu
