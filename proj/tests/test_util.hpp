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

#ifndef FACEVSR_TESTS_TEST_UTIL_HPP_
#define FACEVSR_TESTS_TEST_UTIL_HPP_

#include <filesystem>
#include <string>

#include "facevsr/dataset.hpp"
#include "facevsr/synthetic.hpp"

namespace test_util {

inline std::filesystem::path temp_dir(const std::string& tag) {
  const auto p = std::filesystem::temp_directory_path() / ("facevsr_" + tag);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

/// Generates a synthetic corpus and runs the real smoothing/align/crop
/// pipeline in memory, returning a ready-to-train dataset.
inline facevsr::data::PreparedDataset prepared_corpus(
    const facevsr::data::SyntheticSpec& spec, const std::string& dir,
    const facevsr::data::PrepareOptions& opt) {
  using namespace facevsr;
  const auto ds = data::generate_synthetic(spec, dir);

  data::PreparedDataset out;
  out.word_task = spec.task == "word";
  out.class_names = ds.class_names;
  for (const auto& entry : ds.manifest.entries) {
    auto [clip, track] = data::load_clip(entry);
    data::PreparedClip pc;
    pc.clip_id = entry.clip_id;
    pc.pixels = data::prepare_clip(clip, track, opt);
    pc.target = entry.label ? *entry.label : *entry.transcript;
    pc.split = entry.split;
    pc.yaw_deg = entry.yaw_deg;
    out.clips.push_back(std::move(pc));
  }
  return out;
}

/// The face_aligned prepare options used by the small experiments.
inline facevsr::data::PrepareOptions face_options(int align, int out) {
  facevsr::data::PrepareOptions opt;
  opt.align_h = align;
  opt.align_w = align;
  opt.roi.kind = facevsr::geometry::RoiKind::kFaceAligned;
  opt.roi.out_h = out;
  opt.roi.out_w = out;
  return opt;
}

}  // namespace test_util

#endif  // FACEVSR_TESTS_TEST_UTIL_HPP_
