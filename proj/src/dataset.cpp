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

#include "facevsr/dataset.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "facevsr/checkpoint.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace facevsr::data {

int PreparedDataset::label_index(const std::string& label) const {
  const auto it = std::find(class_names.begin(), class_names.end(), label);
  if (it == class_names.end()) throw InvalidArgument("unknown label '" + label + "'");
  return static_cast<int>(it - class_names.begin());
}

std::vector<int64_t> PreparedDataset::split_indices(Split s) const {
  std::vector<int64_t> out;
  for (size_t i = 0; i < clips.size(); ++i)
    if (clips[i].split == s) out.push_back(static_cast<int64_t>(i));
  return out;
}

Tensor prepare_clip(const VideoClip& clip, const LandmarkTrack& track,
                    const PrepareOptions& opt,
                    std::vector<geometry::SimilarityTransform>* transforms,
                    geometry::CropWindow* window) {
  const LandmarkTrack smoothed = geometry::smooth_landmarks(track, opt.smooth_sigma);
  const int64_t t_count = clip.pixels.dim(0);
  const int64_t h = clip.pixels.dim(1), w = clip.pixels.dim(2), c = clip.pixels.dim(3);
  const auto face_template = geometry::FaceTemplate::canonical(opt.align_h, opt.align_w);

  Tensor out({t_count, opt.roi.out_h, opt.roi.out_w, c});
  for (int64_t t = 0; t < t_count; ++t) {
    Tensor frame({h, w, c});
    std::copy(clip.pixels.data() + t * h * w * c, clip.pixels.data() + (t + 1) * h * w * c,
              frame.data());
    Tensor pts({smoothed.landmark_count(), 2});
    for (int64_t l = 0; l < pts.dim(0); ++l) {
      pts.at({l, 0}) = smoothed.points.at({t, l, 0});
      pts.at({l, 1}) = smoothed.points.at({t, l, 1});
    }

    Tensor cropped;
    if (opt.align) {
      geometry::AlignedFace aligned = geometry::align_face(frame, pts, face_template);
      Tensor warped_pts = geometry::transform_landmarks(pts, aligned.transform);
      if (transforms) transforms->push_back(aligned.transform);
      if (window && t == 0) *window = geometry::roi_window(aligned.image, warped_pts, opt.roi);
      cropped = geometry::crop_roi(aligned.image, warped_pts, opt.roi);
    } else {
      if (transforms) transforms->push_back(geometry::SimilarityTransform::identity());
      if (window && t == 0) *window = geometry::roi_window(frame, pts, opt.roi);
      cropped = geometry::crop_roi(frame, pts, opt.roi);
    }
    std::copy(cropped.data(), cropped.data() + cropped.numel(),
              out.data() + t * cropped.numel());
  }
  return out;
}

PrepareOutcome prepare_dataset(const Manifest& manifest, const PrepareOptions& opt,
                               const std::string& out_dir) {
  fs::create_directories(out_dir);
  PrepareOutcome outcome;

  json index;
  index["word_task"] = !manifest.entries.empty() && manifest.entries.front().label.has_value();
  index["roi"] = opt.roi.to_json();
  index["align"] = {{"enabled", opt.align},
                    {"template", {opt.align_h, opt.align_w}},
                    {"smooth_sigma", opt.smooth_sigma}};
  index["classes"] = manifest.class_names();
  json clip_list = json::array();

  for (const auto& entry : manifest.entries) {
    try {
      auto [clip, track] = load_clip(entry);
      std::vector<geometry::SimilarityTransform> transforms;
      geometry::CropWindow window{};
      Tensor pixels = prepare_clip(clip, track, opt, &transforms, &window);

      models::Checkpoint shard;
      shard.arrays["pixels"] = std::move(pixels);
      json side;
      side["clip_id"] = entry.clip_id;
      side["target"] = entry.label ? *entry.label : *entry.transcript;
      side["split"] = to_string(entry.split);
      if (entry.yaw_deg) side["yaw_deg"] = *entry.yaw_deg;
      json tf = json::array();
      for (const auto& t : transforms)
        tf.push_back({{"scale", t.scale}, {"rotation", t.rotation}, {"tx", t.tx}, {"ty", t.ty}});
      side["transforms"] = std::move(tf);
      side["pre_resize_window"] = {{"x0", window.x0}, {"y0", window.y0},
                                   {"w", window.w}, {"h", window.h}};
      shard.metrics = side;
      shard.save((fs::path(out_dir) / entry.clip_id).string());

      clip_list.push_back(entry.clip_id);
      ++outcome.ok;
    } catch (const Error& e) {
      outcome.failures.push_back(entry.clip_id + ": " + e.what());
      ++outcome.failed;
    }
  }
  index["clips"] = std::move(clip_list);

  std::ofstream f(fs::path(out_dir) / "index.json", std::ios::binary);
  if (!f) throw IoError("cannot write index.json under " + out_dir);
  f << index.dump(2) << "\n";
  return outcome;
}

PreparedDataset PreparedDataset::load(const std::string& shard_dir) {
  std::ifstream f(fs::path(shard_dir) / "index.json");
  if (!f) throw IoError("no index.json under " + shard_dir);
  json index;
  f >> index;

  PreparedDataset ds;
  ds.word_task = index.value("word_task", true);
  if (index.contains("classes"))
    ds.class_names = index.at("classes").get<std::vector<std::string>>();

  for (const auto& id : index.at("clips")) {
    const std::string clip_id = id.get<std::string>();
    models::Checkpoint shard =
        models::Checkpoint::load((fs::path(shard_dir) / clip_id).string());
    PreparedClip pc;
    pc.clip_id = clip_id;
    pc.pixels = std::move(shard.arrays.at("pixels"));
    pc.target = shard.metrics.at("target").get<std::string>();
    pc.split = split_from_string(shard.metrics.at("split").get<std::string>());
    if (shard.metrics.contains("yaw_deg"))
      pc.yaw_deg = shard.metrics.at("yaw_deg").get<double>();
    ds.clips.push_back(std::move(pc));
  }
  return ds;
}

}  // namespace facevsr::data
