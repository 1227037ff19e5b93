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

#ifndef FACEVSR_SYNTHETIC_HPP_
#define FACEVSR_SYNTHETIC_HPP_

#include <string>
#include <vector>

#include <json.hpp>

#include "facevsr/manifest.hpp"

namespace facevsr::data {

enum class CueRegion { kMouth, kCheeks, kUpperFace };

std::string to_string(CueRegion r);
CueRegion cue_region_from_string(const std::string& s);

/// Deterministic schematic talking-face corpus. Each class is a distinct
/// mouth/cheek/eyebrow motion pattern; which regions carry the
/// class-discriminative pattern is controlled by cue_regions and
/// redundancy. Everything non-discriminative is drawn from per-clip
/// streams independent of the class, so occluding the cue region leaves
/// nothing for a classifier to exploit.
struct SyntheticSpec {
  int num_classes = 8;
  std::vector<CueRegion> cue_regions{CueRegion::kMouth};
  bool redundancy = false;
  int frames = 16;
  int canvas_h = 48;
  int canvas_w = 48;
  uint64_t seed = 0;
  int clips_per_class = 40;

  // "word" emits labels; "sentence" emits transcripts drawn from a tiny
  // fixed grammar over the class vocabulary.
  std::string task = "word";
  int sentence_words = 3;
  int sentence_clips = 120;

  void validate() const;
  nlohmann::json to_json() const;
  static SyntheticSpec from_json(const nlohmann::json& j);
};

struct Box {
  double x0 = 0, y0 = 0, w = 0, h = 0;
  bool contains(double x, double y) const {
    return x >= x0 && x < x0 + w && y >= y0 && y < y0 + h;
  }
  nlohmann::json to_json() const { return {{"x0", x0}, {"y0", y0}, {"w", w}, {"h", h}}; }
  static Box from_json(const nlohmann::json& j) {
    return {j.at("x0"), j.at("y0"), j.at("w"), j.at("h")};
  }
};

/// Canvas-space regions guaranteed to contain each facial feature across
/// all per-clip jitter and motion. mouth covers every class-dependent pixel
/// of a mouth-cue corpus, making occlusion experiments exact.
struct FaceLayout {
  int canvas_h = 0, canvas_w = 0;
  Box mouth;
  Box cheek_left, cheek_right;
  Box upper_face;

  nlohmann::json to_json() const;
  static FaceLayout from_json(const nlohmann::json& j);
};

/// Layout is a pure function of the spec (no RNG involved).
FaceLayout synthetic_layout(const SyntheticSpec& spec);

/// Vocabulary used for class labels / the sentence grammar.
std::vector<std::string> synthetic_vocabulary(int num_classes);

struct SyntheticDataset {
  Manifest manifest;
  FaceLayout layout;
  std::vector<std::string> class_names;
  std::string root;
  std::string manifest_path;
};

/// Renders the corpus under out_dir:
///   out_dir/manifest.jsonl
///   out_dir/layout.json
///   out_dir/clips/<clip_id>/frame_NNNN.png + landmarks.json
/// Identical specs produce byte-identical trees.
SyntheticDataset generate_synthetic(const SyntheticSpec& spec,
                                    const std::string& out_dir);

}  // namespace facevsr::data

#endif  // FACEVSR_SYNTHETIC_HPP_
