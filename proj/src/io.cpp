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

#include "slu/io.hpp"

#include <unistd.h>

#include <atomic>
#include <cstring>
#include <fstream>

namespace slu {

namespace fs = std::filesystem;

void BinaryWriter::u32(uint32_t v) {
  for (int i = 0; i < 4; ++i) buf_.push_back(char(v >> (8 * i)));
}

void BinaryWriter::u64(uint64_t v) {
  for (int i = 0; i < 8; ++i) buf_.push_back(char(v >> (8 * i)));
}

void BinaryWriter::f64(double v) {
  uint64_t bits;
  std::memcpy(&bits, &v, 8);
  u64(bits);
}

void BinaryWriter::bytes(std::string_view s) { buf_.append(s.data(), s.size()); }

void BinaryWriter::str(std::string_view s) {
  u64(s.size());
  bytes(s);
}

void BinaryReader::need(size_t n) {
  if (pos_ + n > data_.size()) throw IoError("truncated input");
}

uint8_t BinaryReader::u8() {
  need(1);
  return uint8_t(data_[pos_++]);
}

uint32_t BinaryReader::u32() {
  need(4);
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= uint32_t(uint8_t(data_[pos_ + i])) << (8 * i);
  pos_ += 4;
  return v;
}

uint64_t BinaryReader::u64() {
  need(8);
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= uint64_t(uint8_t(data_[pos_ + i])) << (8 * i);
  pos_ += 8;
  return v;
}

double BinaryReader::f64() {
  uint64_t bits = u64();
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

std::string BinaryReader::bytes(size_t n) {
  need(n);
  std::string out(data_.substr(pos_, n));
  pos_ += n;
  return out;
}

std::string BinaryReader::str() {
  uint64_t n = u64();
  if (n > remaining()) throw IoError("truncated string");
  return bytes(size_t(n));
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed: " + path.string());
  return data;
}

void write_file_atomic(const fs::path& path, std::string_view data) {
  static std::atomic<uint64_t> counter{0};
  fs::path dir = path.parent_path();
  if (!dir.empty()) fs::create_directories(dir);
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(counter.fetch_add(1)) + "." +
         std::to_string(uint64_t(::getpid()));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot create " + tmp.string());
    out.write(data.data(), std::streamsize(data.size()));
    out.flush();
    if (!out) throw IoError("write failed: " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw IoError("rename failed: " + path.string() + ": " + ec.message());
  }
}

}  // namespace slu
