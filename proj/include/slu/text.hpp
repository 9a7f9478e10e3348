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

#include <string>
#include <string_view>
#include <vector>

namespace slu {

// Lowercases ASCII letters in place; non-ASCII bytes pass through untouched.
std::string to_lower(std::string_view s);

// Strips leading/trailing ASCII punctuation from a single token.
std::string strip_punct(std::string_view s);

// Normalizes a surface string the way the recognizer expects its input:
// lowercase, tokens split on whitespace, punctuation stripped per token,
// empty tokens dropped. Returned tokens joined by a single space.
std::string normalize(std::string_view s);

// normalize() but returning the token sequence.
std::vector<std::string> tokenize(std::string_view s);

std::string join(const std::vector<std::string>& tokens, std::string_view sep = " ");

// `[A-Za-z][A-Za-z0-9_.]*` — the identifier convention used for intent,
// slot and type names throughout the toolkit.
bool is_identifier(std::string_view s);

// Invocation names are one or more space-separated lowercase words.
bool is_invocation_name(std::string_view s);

}  // namespace slu
