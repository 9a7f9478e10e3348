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

#include "slu/quantize.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

#include "slu/io.hpp"

namespace slu {

bool QuantizedMatrix::is_sentinel(uint32_t r, uint32_t c) const {
  if (sentinels.empty()) return false;
  size_t bit = size_t(r) * cols + c;
  return (sentinels[bit >> 3] >> (bit & 7)) & 1;
}

double QuantizedMatrix::at(uint32_t r, uint32_t c) const {
  if (is_sentinel(r, c)) return kWeightNegInf;
  return double(scales[r]) * double(values[size_t(r) * cols + c]);
}

QuantizedMatrix quantize_rows(const std::vector<double>& weights, uint32_t rows,
                              uint32_t cols, const std::vector<bool>& sentinel_mask) {
  if (weights.size() != size_t(rows) * cols)
    throw std::invalid_argument("quantize: shape mismatch");
  if (!sentinel_mask.empty() && sentinel_mask.size() != weights.size())
    throw std::invalid_argument("quantize: sentinel mask shape mismatch");

  QuantizedMatrix q;
  q.rows = rows;
  q.cols = cols;
  q.scales.resize(rows);
  q.values.resize(weights.size());
  if (!sentinel_mask.empty()) q.sentinels.assign((weights.size() + 7) / 8, 0);

  for (uint32_t r = 0; r < rows; ++r) {
    double max_abs = 0;
    for (uint32_t c = 0; c < cols; ++c) {
      size_t i = size_t(r) * cols + c;
      if (!sentinel_mask.empty() && sentinel_mask[i]) continue;
      double w = weights[i];
      if (!std::isfinite(w)) throw std::invalid_argument("quantize: non-finite weight");
      max_abs = std::max(max_abs, std::abs(w));
    }
    double scale = max_abs / 127.0;
    q.scales[r] = float(scale);
    for (uint32_t c = 0; c < cols; ++c) {
      size_t i = size_t(r) * cols + c;
      if (!sentinel_mask.empty() && sentinel_mask[i]) {
        q.values[i] = 0;
        q.sentinels[i >> 3] |= uint8_t(1u << (i & 7));
        continue;
      }
      if (scale == 0) {
        q.values[i] = 0;
      } else {
        double v = std::round(weights[i] / scale);
        v = std::max(-127.0, std::min(127.0, v));
        q.values[i] = int8_t(v);
      }
    }
  }
  return q;
}

std::vector<double> dequantize(const QuantizedMatrix& q) {
  std::vector<double> out(size_t(q.rows) * q.cols);
  for (uint32_t r = 0; r < q.rows; ++r)
    for (uint32_t c = 0; c < q.cols; ++c) out[size_t(r) * q.cols + c] = q.at(r, c);
  return out;
}

std::string QuantizedMatrix::to_bytes() const {
  BinaryWriter w;
  w.u32(rows);
  w.u32(cols);
  for (float s : scales) {
    uint32_t bits;
    static_assert(sizeof(bits) == sizeof(s));
    std::memcpy(&bits, &s, 4);
    w.u32(bits);
  }
  w.bytes(std::string_view(reinterpret_cast<const char*>(values.data()), values.size()));
  w.u8(sentinels.empty() ? 0 : 1);
  if (!sentinels.empty())
    w.bytes(std::string_view(reinterpret_cast<const char*>(sentinels.data()),
                             sentinels.size()));
  return w.take();
}

QuantizedMatrix QuantizedMatrix::from_bytes(std::string_view bytes) {
  BinaryReader r(bytes);
  QuantizedMatrix q;
  q.rows = r.u32();
  q.cols = r.u32();
  q.scales.resize(q.rows);
  for (uint32_t i = 0; i < q.rows; ++i) {
    uint32_t bits = r.u32();
    float s;
    std::memcpy(&s, &bits, 4);
    q.scales[i] = s;
  }
  size_t n = size_t(q.rows) * q.cols;
  std::string vals = r.bytes(n);
  q.values.assign(reinterpret_cast<const int8_t*>(vals.data()),
                  reinterpret_cast<const int8_t*>(vals.data()) + n);
  if (r.u8()) {
    std::string mask = r.bytes((n + 7) / 8);
    q.sentinels.assign(reinterpret_cast<const uint8_t*>(mask.data()),
                       reinterpret_cast<const uint8_t*>(mask.data()) + mask.size());
  }
  return q;
}

}  // namespace slu
