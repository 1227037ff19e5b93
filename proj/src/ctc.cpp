// Copyright 2026 The FaceVSR Authors
//
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

#include "facevsr/ctc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "facevsr/layers.hpp"

namespace facevsr::models {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Extended label sequence: blank, z1, blank, z2, ..., blank.
std::vector<int> extend_target(const std::vector<int>& target, int blank) {
  std::vector<int> z;
  z.reserve(target.size() * 2 + 1);
  z.push_back(blank);
  for (int c : target) {
    z.push_back(c);
    z.push_back(blank);
  }
  return z;
}
}  // namespace

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

bool ctc_target_fits(int64_t t, const std::vector<int>& target) {
  int64_t need = static_cast<int64_t>(target.size());
  for (size_t i = 1; i < target.size(); ++i)
    if (target[i] == target[i - 1]) ++need;  // a blank must separate repeats
  return need <= t;
}

CtcResult ctc_loss(const Tensor& logits, const std::vector<int>& target) {
  if (logits.rank() != 2) throw ShapeMismatch("ctc_loss expects TxA logits");
  const int64_t t_len = logits.dim(0);
  const int64_t a = logits.dim(1);
  const int blank = static_cast<int>(a) - 1;
  for (int c : target)
    if (c < 0 || c >= blank)
      throw InvalidArgument("ctc target symbol out of range");
  if (!ctc_target_fits(t_len, target))
    throw InvalidArgument("ctc target longer than the logit sequence allows");

  const Tensor lp = log_softmax(logits);
  const std::vector<int> z = extend_target(target, blank);
  const int64_t s_len = static_cast<int64_t>(z.size());

  auto allow_skip = [&](int64_t s) {
    // Diagonal transition s-2 -> s is legal unless it jumps over a needed
    // blank (same symbol repeated) or starts from a blank.
    return s >= 2 && z[static_cast<size_t>(s)] != blank &&
           z[static_cast<size_t>(s)] != z[static_cast<size_t>(s - 2)];
  };

  // Forward variables, emissions included through step t.
  Tensor alpha({t_len, s_len});
  alpha.fill(kNegInf);
  alpha.at({0, 0}) = lp.at({0, z[0]});
  if (s_len > 1) alpha.at({0, 1}) = lp.at({0, z[1]});
  for (int64_t t = 1; t < t_len; ++t)
    for (int64_t s = 0; s < s_len; ++s) {
      double v = alpha.at({t - 1, s});
      if (s >= 1) v = log_add(v, alpha.at({t - 1, s - 1}));
      if (allow_skip(s)) v = log_add(v, alpha.at({t - 1, s - 2}));
      if (v != kNegInf) alpha.at({t, s}) = v + lp.at({t, z[static_cast<size_t>(s)]});
    }

  double log_p = alpha.at({t_len - 1, s_len - 1});
  if (s_len > 1) log_p = log_add(log_p, alpha.at({t_len - 1, s_len - 2}));

  // Backward variables, emissions included from step t.
  Tensor beta({t_len, s_len});
  beta.fill(kNegInf);
  beta.at({t_len - 1, s_len - 1}) = lp.at({t_len - 1, z[static_cast<size_t>(s_len - 1)]});
  if (s_len > 1)
    beta.at({t_len - 1, s_len - 2}) = lp.at({t_len - 1, z[static_cast<size_t>(s_len - 2)]});
  for (int64_t t = t_len - 2; t >= 0; --t)
    for (int64_t s = 0; s < s_len; ++s) {
      double v = beta.at({t + 1, s});
      if (s + 1 < s_len) v = log_add(v, beta.at({t + 1, s + 1}));
      if (s + 2 < s_len && allow_skip(s + 2)) v = log_add(v, beta.at({t + 1, s + 2}));
      if (v != kNegInf) beta.at({t, s}) = v + lp.at({t, z[static_cast<size_t>(s)]});
    }

  // d(-logP)/d(logits) = softmax(logits) - occupancy.
  Tensor grad(logits.shape());
  for (int64_t t = 0; t < t_len; ++t) {
    std::vector<double> occupancy(static_cast<size_t>(a), kNegInf);
    for (int64_t s = 0; s < s_len; ++s) {
      const double g = alpha.at({t, s}) + beta.at({t, s}) -
                       lp.at({t, z[static_cast<size_t>(s)]});
      if (g != kNegInf) {
        auto& o = occupancy[static_cast<size_t>(z[static_cast<size_t>(s)])];
        o = log_add(o, g);
      }
    }
    for (int64_t c = 0; c < a; ++c) {
      const double p = std::exp(lp.at({t, c}));
      const double q = occupancy[static_cast<size_t>(c)] == kNegInf
                           ? 0.0
                           : std::exp(occupancy[static_cast<size_t>(c)] - log_p);
      grad.at({t, c}) = p - q;
    }
  }

  return {-log_p, std::move(grad)};
}

double ctc_viterbi_nll(const Tensor& log_probs, const std::vector<int>& target) {
  const int64_t t_len = log_probs.dim(0);
  const int64_t a = log_probs.dim(1);
  const int blank = static_cast<int>(a) - 1;
  const std::vector<int> z = extend_target(target, blank);
  const int64_t s_len = static_cast<int64_t>(z.size());

  auto allow_skip = [&](int64_t s) {
    return s >= 2 && z[static_cast<size_t>(s)] != blank &&
           z[static_cast<size_t>(s)] != z[static_cast<size_t>(s - 2)];
  };

  std::vector<double> prev(static_cast<size_t>(s_len), kNegInf), cur(prev);
  prev[0] = log_probs.at({0, z[0]});
  if (s_len > 1) prev[1] = log_probs.at({0, z[1]});
  for (int64_t t = 1; t < t_len; ++t) {
    for (int64_t s = 0; s < s_len; ++s) {
      double v = prev[static_cast<size_t>(s)];
      if (s >= 1) v = std::max(v, prev[static_cast<size_t>(s - 1)]);
      if (allow_skip(s)) v = std::max(v, prev[static_cast<size_t>(s - 2)]);
      cur[static_cast<size_t>(s)] =
          v == kNegInf ? kNegInf : v + log_probs.at({t, z[static_cast<size_t>(s)]});
    }
    std::swap(prev, cur);
  }
  double best = prev[static_cast<size_t>(s_len - 1)];
  if (s_len > 1) best = std::max(best, prev[static_cast<size_t>(s_len - 2)]);
  return -best;
}

}  // namespace facevsr::models
