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
#include <string>
#include <vector>

namespace slu {

// Per-row symmetric linear quantization to 8 bits: scale = max|w| / 127,
// stored value = round(w / scale). Rows of all zeros get scale 0 and
// dequantize exactly. Sentinel entries (banned transitions) are kept in an
// out-of-band mask and restored verbatim.
struct QuantizedMatrix {
  uint32_t rows = 0;
  uint32_t cols = 0;
  std::vector<float> scales;       // one per row
  std::vector<int8_t> values;      // row-major, rows*cols
  std::vector<uint8_t> sentinels;  // bitmask, rows*cols bits; may be empty

  double at(uint32_t r, uint32_t c) const;
  bool is_sentinel(uint32_t r, uint32_t c) const;

  std::string to_bytes() const;
  static QuantizedMatrix from_bytes(std::string_view bytes);
};

inline constexpr double kWeightNegInf = -1e30;  // banned-transition sentinel

// `sentinel_mask` may be empty (no sentinels); otherwise one bool per entry.
QuantizedMatrix quantize_rows(const std::vector<double>& weights, uint32_t rows,
                              uint32_t cols,
                              const std::vector<bool>& sentinel_mask = {});

std::vector<double> dequantize(const QuantizedMatrix& q);

}  // namespace slu
