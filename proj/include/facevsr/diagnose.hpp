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

#ifndef FACEVSR_DIAGNOSE_HPP_
#define FACEVSR_DIAGNOSE_HPP_

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "facevsr/dataset.hpp"
#include "facevsr/eval.hpp"
#include "facevsr/models.hpp"

namespace facevsr::diagnose {

/// Channel-max-pooled activation maps per time step, min-max normalized to
/// [0,1] for rendering. layer ids are the word model's taps
/// (frontend.conv1, frontend.pool1, frontend.stage1..4).
struct FeatureMaps {
  std::string layer_id;
  Tensor maps;  // T' x H' x W', values in [0,1]
};

FeatureMaps feature_maps(models::WordModel& model, const Tensor& clip,
                         const std::string& layer_id);

/// Positive-part input gradient under guided backpropagation, max-normalized
/// per clip. Shape equals the input video (T×H×W).
struct SaliencyVolume {
  Tensor values;        // T x H x W, >= 0
  std::string clip_id;
  std::string target;   // class name or decoded transcript
};

/// Word model: the scalar is the pre-softmax score of target_class.
SaliencyVolume guided_backprop_saliency(models::WordModel& model, const Tensor& clip,
                                        int target_class);

/// Sentence model: the scalar is Σ_t log p(y_t|x) of the greedy decode
/// (or of the given transcript symbols when target is provided).
SaliencyVolume guided_backprop_saliency(models::SentenceModel& model, const Tensor& clip,
                                        const eval::Alphabet& alphabet,
                                        const std::optional<std::string>& target = std::nullopt);

/// Accuracy drop per masked grid position: every test clip gets a k×k zero
/// patch at the identical position in every frame, the word accuracy is
/// recomputed, and drop = baseline − masked. The grid covers all valid
/// positions at the configured stride.
struct OcclusionHeatmap {
  int patch = 7;
  int stride = 7;
  double baseline = 0.0;
  Tensor drops;  // grid_h x grid_w

  std::pair<int64_t, int64_t> argmax_cell() const;
  /// Patch center in input pixels for a grid cell.
  std::pair<double, double> cell_center(int64_t gy, int64_t gx) const;
  nlohmann::json to_json() const;
};

OcclusionHeatmap occlusion_heatmap(models::WordModel& model,
                                   const data::PreparedDataset& dataset,
                                   data::Split split, int patch = 7, int stride = 7,
                                   double fill = 0.0);

/// Word accuracy on a split with one fixed rectangle zeroed in every frame
/// of every clip (full-region occlusion probes).
double occluded_accuracy(models::WordModel& model, const data::PreparedDataset& dataset,
                         data::Split split, double x0, double y0, double w, double h,
                         double fill = 0.0);

/// Renders a nonnegative [0,1] grid as a PNG using the documented intensity
/// ramp (dark blue → warm yellow).
void write_heatmap_png(const std::string& path, const Tensor& grid, int upscale = 1);

}  // namespace facevsr::diagnose

#endif  // FACEVSR_DIAGNOSE_HPP_
