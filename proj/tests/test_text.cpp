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

#include <doctest.h>

#include "slu/hashing.hpp"
#include "slu/text.hpp"

using namespace slu;

TEST_CASE("tokenize lowercases, splits and strips punctuation") {
  CHECK(tokenize("What is the Horoscope for Taurus?") ==
        std::vector<std::string>{"what", "is", "the", "horoscope", "for", "taurus"});
  CHECK(tokenize("") == std::vector<std::string>{});
  CHECK(tokenize("  multiple   spaces ") == std::vector<std::string>{"multiple", "spaces"});
  CHECK(tokenize("don't stop") == std::vector<std::string>{"don't", "stop"});
  CHECK(tokenize("...") == std::vector<std::string>{});
}

TEST_CASE("normalize joins the token stream") {
  CHECK(normalize("Hello,  World!") == "hello world");
}

TEST_CASE("identifier convention") {
  CHECK(is_identifier("GetHoroscope"));
  CHECK(is_identifier("AMAZON.DATE"));
  CHECK(is_identifier("a_b.c9"));
  CHECK_FALSE(is_identifier(""));
  CHECK_FALSE(is_identifier("9lives"));
  CHECK_FALSE(is_identifier("has space"));
  CHECK_FALSE(is_identifier("dash-ed"));
}

TEST_CASE("invocation names are lowercase words") {
  CHECK(is_invocation_name("daily horoscope"));
  CHECK(is_invocation_name("taxi"));
  CHECK_FALSE(is_invocation_name("Daily Horoscope"));
  CHECK_FALSE(is_invocation_name(" leading"));
  CHECK_FALSE(is_invocation_name("trailing "));
  CHECK_FALSE(is_invocation_name("two  spaces"));
  CHECK_FALSE(is_invocation_name(""));
}

TEST_CASE("sha256 matches known vectors") {
  CHECK(sha256_hex("") ==
        "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_hex("abc") ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("murmur64 is deterministic and seed-sensitive") {
  CHECK(murmur64("taurus", 6, 1) == murmur64("taurus", 6, 1));
  CHECK(murmur64("taurus", 6, 1) != murmur64("taurus", 6, 2));
  CHECK(murmur64("taurus", 6, 1) != murmur64("taurut", 6, 1));
}
