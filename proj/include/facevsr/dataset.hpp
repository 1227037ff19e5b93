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

#ifndef FACEVSR_DATASET_HPP_
#define FACEVSR_DATASET_HPP_

#include <optional>
#include <string>
#include <vector>

#include "facevsr/geometry.hpp"
#include "facevsr/manifest.hpp"

namespace facevsr::data {

/// One preprocessed clip: the RoI crop stack plus everything evaluation
/// needs. Produced by the prepare step, consumed by training and eval.
struct PreparedClip {
  std::string clip_id;
  Tensor pixels;  // T x H x W x C, [0,1]
  std::string target;  // label (word) or transcript (sentence)
  Split split = Split::kTrain;
  std::optional<double> yaw_deg;
};

struct PreparedDataset {
  bool word_task = true;
  std::vector<PreparedClip> clips;
  std::vector<std::string> class_names;  // word task, stable order

  int label_index(const std::string& label) const;
  std::vector<int64_t> split_indices(Split s) const;

  /// Reads <dir>/index.json plus the per-clip shards.
  static PreparedDataset load(const std::string& shard_dir);
};

struct PrepareOptions {
  geometry::RoISpec roi;
  int align_h = 112, align_w = 112;  // alignment template for the crop input
  double smooth_sigma = 0.5;
  bool align = true;  // fixed-box kinds can run on raw frames
};

struct PrepareOutcome {
  int64_t ok = 0;
  int64_t failed = 0;
  std::vector<std::string> failures;  // clip_id: message
};

/// Smooths landmarks, aligns every frame to the template, crops the RoI and
/// writes one shard per clip under out_dir, with a sidecar recording the
/// per-frame transform and the pre-resize crop window. Per-clip failures
/// are collected, not fatal.
PrepareOutcome prepare_dataset(const Manifest& manifest, const PrepareOptions& opt,
                               const std::string& out_dir);

/// In-memory variant of the same pipeline for one clip (ordered frames).
Tensor prepare_clip(const VideoClip& clip, const LandmarkTrack& track,
                    const PrepareOptions& opt,
                    std::vector<geometry::SimilarityTransform>* transforms = nullptr,
                    geometry::CropWindow* window = nullptr);

}  // namespace facevsr::data

#endif  // FACEVSR_DATASET_HPP_
