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

#ifndef FACEVSR_AUGMENT_HPP_
#define FACEVSR_AUGMENT_HPP_

#include <optional>
#include <utility>

#include <json.hpp>

#include "facevsr/rng.hpp"
#include "facevsr/tensor.hpp"

namespace facevsr::augment {

/// Temporally-consistent Cutout: one patch position per clip, zeroed in
/// every frame. patch half the input size is the tuned default (56 on 112,
/// 50 on 100).
struct CutoutConfig {
  int patch_h = 0;
  int patch_w = 0;
  double apply_prob = 1.0;
  double fill_value = 0.0;

  nlohmann::json to_json() const;
  static CutoutConfig from_json(const nlohmann::json& j);
};

/// Draws one top-left corner uniformly among positions keeping the patch
/// fully inside the frame, then writes fill_value at that patch in every
/// frame. With probability 1 − apply_prob the clip is returned unchanged.
/// Clip layout is T×H×W×C.
Tensor cutout(const Tensor& clip, const CutoutConfig& cfg, Rng& rng);

/// One offset drawn per clip, applied to all frames.
Tensor random_crop_consistent(const Tensor& clip, int out_h, int out_w, Rng& rng);

/// Deterministic central crop used at evaluation time.
Tensor center_crop(const Tensor& clip, int out_h, int out_w);

/// Mirrors every frame together with probability prob.
Tensor hflip(const Tensor& clip, Rng& rng, double prob);

/// Each frame is independently deleted or duplicated with per_frame_prob
/// each; at least one frame always survives.
Tensor temporal_jitter(const Tensor& clip, double per_frame_prob, Rng& rng);

struct AugmentPolicy {
  std::optional<CutoutConfig> cutout;
  std::optional<std::pair<int, int>> random_crop_to;
  double hflip_prob = 0.0;
  double temporal_jitter_prob = 0.0;

  nlohmann::json to_json() const;
  static AugmentPolicy from_json(const nlohmann::json& j);
};

/// Applies the policy in the fixed order jitter → crop → flip → cutout, so
/// cutout coordinates live in the final input space. In evaluation mode the
/// stochastic steps are replaced by identity / central crop.
Tensor apply_policy(const Tensor& clip, const AugmentPolicy& policy, Rng& rng,
                    bool training);

}  // namespace facevsr::augment

#endif  // FACEVSR_AUGMENT_HPP_
