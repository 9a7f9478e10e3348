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

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace slu {

// Elastic-net bookkeeping for sparse stochastic subgradient descent.
// L2 is applied as lazy multiplicative decay, L1 as the cumulative-penalty
// truncation of Tsuruoka et al., so untouched coordinates stay cheap and
// exact zeros occur. Coordinates must be caught up before their current
// values are read.
class ElasticNetSgd {
 public:
  ElasticNetSgd(std::vector<double>& weights, double l1, double l2)
      : w_(weights), l1_(l1), l2_(l2) {
    if (l1_ < 0 || l2_ < 0) throw std::invalid_argument("negative regularizer");
    if (l1_ > 0) l1_at_.assign(w_.size(), 0.0);
    if (l2_ > 0) l2_at_.assign(w_.size(), 0.0);
  }

  void catch_up(size_t i) {
    if (l2_ > 0) {
      w_[i] *= std::exp(l2_log_decay_ - l2_at_[i]);
      l2_at_[i] = l2_log_decay_;
    }
    if (l1_ > 0) {
      double pending = l1_cum_ - l1_at_[i];
      if (pending > 0) {
        if (w_[i] > 0)
          w_[i] = std::max(0.0, w_[i] - pending);
        else if (w_[i] < 0)
          w_[i] = std::min(0.0, w_[i] + pending);
      }
      l1_at_[i] = l1_cum_;
    }
  }

  // Advances the penalty totals by one optimizer step of size eta.
  void advance(double eta) {
    if (l1_ > 0) l1_cum_ += eta * l1_;
    if (l2_ > 0) {
      double decay = 1.0 - 2.0 * eta * l2_;
      if (decay <= 0) throw std::invalid_argument("l2 step too large");
      l2_log_decay_ += std::log(decay);
    }
  }

  void finalize() {
    if (l1_ == 0 && l2_ == 0) return;
    for (size_t i = 0; i < w_.size(); ++i) catch_up(i);
  }

 private:
  std::vector<double>& w_;
  double l1_;
  double l2_;
  double l1_cum_ = 0;
  double l2_log_decay_ = 0;
  std::vector<double> l1_at_;
  std::vector<double> l2_at_;
};

inline double inverse_time_eta(double eta0, double step, double horizon) {
  return eta0 / (1.0 + step / horizon);
}

}  // namespace slu
