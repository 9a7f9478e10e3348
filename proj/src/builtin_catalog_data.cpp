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

#include "slu/interaction_model.hpp"

namespace slu {

// Compiled-in copy of data/builtin_types.json. A unit test asserts the two
// stay byte-identical.
const char* kBuiltinTypesJson = R"json({
  "types": [
    {
      "name": "AMAZON.DATE",
      "values": [
        "today", "tonight", "tomorrow", "yesterday",
        "monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday",
        "this week", "next week", "this weekend", "this month", "next month"
      ]
    },
    {
      "name": "AMAZON.NUMBER",
      "values": [
        "zero", "one", "two", "three", "four", "five", "six", "seven", "eight",
        "nine", "ten", "eleven", "twelve", "thirteen", "fourteen", "fifteen",
        "sixteen", "seventeen", "eighteen", "nineteen", "twenty"
      ]
    },
    {
      "name": "AMAZON.City",
      "values": [
        "new york", "seattle", "portland", "san francisco", "los angeles",
        "chicago", "boston", "austin", "denver", "miami", "atlanta", "houston"
      ]
    },
    {
      "name": "AMAZON.US_STATE",
      "values": [
        "washington", "oregon", "california", "texas", "florida", "new york",
        "illinois", "massachusetts", "colorado", "georgia"
      ]
    }
  ]
}
)json";

const BuiltinCatalog& BuiltinCatalog::bundled() {
  static const BuiltinCatalog catalog = BuiltinCatalog::from_json(kBuiltinTypesJson);
  return catalog;
}

}  // namespace slu
