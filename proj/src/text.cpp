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

#include "slu/text.hpp"

#include <cctype>

namespace slu {

namespace {

inline bool ascii_punct(unsigned char c) {
  return c < 0x80 && std::ispunct(c);
}

}  // namespace

std::string to_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    unsigned char u = static_cast<unsigned char>(c);
    if (u < 0x80) c = static_cast<char>(std::tolower(u));
  }
  return out;
}

std::string strip_punct(std::string_view s) {
  size_t b = 0, e = s.size();
  while (b < e && ascii_punct(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && ascii_punct(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> tokenize(std::string_view s) {
  std::vector<std::string> tokens;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) {
      std::string t = strip_punct(cur);
      if (!t.empty()) tokens.push_back(to_lower(t));
      cur.clear();
    }
  };
  for (char c : s) {
    unsigned char u = static_cast<unsigned char>(c);
    if (u < 0x80 && std::isspace(u)) {
      flush();
    } else {
      cur.push_back(c);
    }
  }
  flush();
  return tokens;
}

std::string normalize(std::string_view s) {
  return join(tokenize(s));
}

std::string join(const std::vector<std::string>& tokens, std::string_view sep) {
  std::string out;
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += sep;
    out += tokens[i];
  }
  return out;
}

bool is_identifier(std::string_view s) {
  if (s.empty()) return false;
  unsigned char c0 = static_cast<unsigned char>(s[0]);
  if (!std::isalpha(c0)) return false;
  for (char c : s.substr(1)) {
    unsigned char u = static_cast<unsigned char>(c);
    if (!(std::isalnum(u) || c == '_' || c == '.')) return false;
  }
  return true;
}

bool is_invocation_name(std::string_view s) {
  if (s.empty()) return false;
  bool word_open = false;
  bool any_word = false;
  for (char c : s) {
    if (c == ' ') {
      if (!word_open) return false;  // leading or doubled space
      word_open = false;
    } else if (c >= 'a' && c <= 'z') {
      word_open = true;
      any_word = true;
    } else {
      return false;
    }
  }
  return any_word && word_open;  // no trailing space
}

}  // namespace slu
