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

#ifndef FACEVSR_MANIFEST_HPP_
#define FACEVSR_MANIFEST_HPP_

#include <optional>
#include <string>
#include <vector>

#include "facevsr/tensor.hpp"

namespace facevsr::data {

enum class Split { kTrain, kVal, kTest };

std::string to_string(Split s);
Split split_from_string(const std::string& s);

/// One dataset sample: a clip directory of numbered PNG frames plus a
/// landmark JSON file. Exactly one of label / transcript is set.
/// Paths are stored verbatim; relative ones resolve against base_dir
/// (the manifest's directory), which is not serialized.
struct ManifestEntry {
  std::string clip_id;
  std::string frames_path;
  std::string landmarks_path;
  std::optional<std::string> label;       // word task
  std::optional<std::string> transcript;  // sentence task
  Split split = Split::kTrain;
  std::optional<double> yaw_deg;
  int64_t duration_frames = 0;
  std::string base_dir;

  std::string resolved_frames_path() const;
  std::string resolved_landmarks_path() const;
};

struct Manifest {
  std::vector<ManifestEntry> entries;

  std::vector<const ManifestEntry*> split_entries(Split s) const;
  /// Distinct labels in first-appearance order (word task).
  std::vector<std::string> class_names() const;
};

/// Parses a JSON Lines manifest. Validates the schema: unique clip_ids,
/// exactly one of label/transcript per entry, known split values.
Manifest load_manifest(const std::string& path);

/// Writes JSON Lines with a fixed key order so write→read→write round-trips
/// bit-identically.
void save_manifest(const Manifest& m, const std::string& path);

/// Per-frame 2D facial landmarks for one clip.
struct LandmarkTrack {
  Tensor points;                   // T x L x 2, pixel coordinates (x, y)
  std::vector<double> confidence;  // T, in [0,1]
  std::string scheme = "ibug68";

  int64_t frames() const { return points.rank() == 3 ? points.dim(0) : 0; }
  int64_t landmark_count() const { return points.rank() == 3 ? points.dim(1) : 0; }
};

LandmarkTrack load_landmarks(const std::string& path);
void save_landmarks(const LandmarkTrack& track, const std::string& path);

/// A loaded video clip, pixels in [0,1].
struct VideoClip {
  Tensor pixels;  // T x H x W x C
  ManifestEntry meta;
};

/// Loads frames + landmarks for one manifest entry. Frames are the sorted
/// *.png files under entry.frames_path. Throws FrameCountMismatch when the
/// frame count disagrees with the landmark track or duration_frames.
std::pair<VideoClip, LandmarkTrack> load_clip(const ManifestEntry& entry);

}  // namespace facevsr::data

#endif  // FACEVSR_MANIFEST_HPP_
