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

#ifndef FACEVSR_CTC_HPP_
#define FACEVSR_CTC_HPP_

#include <vector>

#include "facevsr/tensor.hpp"

namespace facevsr::models {

/// log(exp(a) + exp(b)) without overflow; -inf behaves as zero probability.
double log_add(double a, double b);

struct CtcResult {
  double loss;         // -log P(target | logits), nats
  Tensor grad_logits;  // same shape as logits
};

/// CTC loss for one sequence of logits (T × A, blank = last column),
/// marginalizing over all monotonic alignments with the standard
/// forward-backward recursion in log space. Throws InvalidArgument when the
/// target cannot be emitted in T steps.
CtcResult ctc_loss(const Tensor& logits, const std::vector<int>& target);

/// -log P of the single best alignment (Viterbi over the same lattice).
/// Used as a sanity bound: the marginal loss never exceeds it.
double ctc_viterbi_nll(const Tensor& log_probs, const std::vector<int>& target);

/// True when the target fits in t steps (repeated symbols need a blank gap).
bool ctc_target_fits(int64_t t, const std::vector<int>& target);

}  // namespace facevsr::models

#endif  // FACEVSR_CTC_HPP_
