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

#include "facevsr/augment.hpp"

#include <algorithm>
#include <vector>

namespace facevsr::augment {

namespace {
void require_clip(const Tensor& clip) {
  if (clip.rank() != 4)
    throw InvalidArgument("expected TxHxWxC clip, got " + clip.shape_str());
}
}  // namespace

nlohmann::json CutoutConfig::to_json() const {
  return {{"patch_h", patch_h}, {"patch_w", patch_w},
          {"apply_prob", apply_prob}, {"fill_value", fill_value}};
}

CutoutConfig CutoutConfig::from_json(const nlohmann::json& j) {
  CutoutConfig c;
  c.patch_h = j.at("patch_h").get<int>();
  c.patch_w = j.at("patch_w").get<int>();
  c.apply_prob = j.value("apply_prob", 1.0);
  c.fill_value = j.value("fill_value", 0.0);
  if (c.patch_h < 0 || c.patch_w < 0)
    throw InvalidArgument("cutout patch dims must be >= 0");
  if (c.apply_prob < 0.0 || c.apply_prob > 1.0)
    throw InvalidArgument("apply_prob must be in [0,1]");
  return c;
}

Tensor cutout(const Tensor& clip, const CutoutConfig& cfg, Rng& rng) {
  require_clip(clip);
  const int64_t t_count = clip.dim(0), h = clip.dim(1), w = clip.dim(2), c = clip.dim(3);
  if (cfg.patch_h > h || cfg.patch_w > w)
    throw PatchLargerThanFrame(std::to_string(cfg.patch_h) + "x" +
                               std::to_string(cfg.patch_w) + " patch on " +
                               std::to_string(h) + "x" + std::to_string(w) + " frames");

  if (!rng.bernoulli(cfg.apply_prob)) return clip;
  if (cfg.patch_h == 0 || cfg.patch_w == 0) return clip;

  const int64_t r = rng.uniform_int(0, h - cfg.patch_h);
  const int64_t col = rng.uniform_int(0, w - cfg.patch_w);

  Tensor out = clip;
  Scalar* p = out.data();
  for (int64_t t = 0; t < t_count; ++t)
    for (int64_t y = r; y < r + cfg.patch_h; ++y)
      for (int64_t x = col; x < col + cfg.patch_w; ++x)
        for (int64_t ch = 0; ch < c; ++ch)
          p[((t * h + y) * w + x) * c + ch] = cfg.fill_value;
  return out;
}

namespace {
Tensor crop_at(const Tensor& clip, int64_t oy, int64_t ox, int out_h, int out_w) {
  const int64_t t_count = clip.dim(0), h = clip.dim(1), w = clip.dim(2), c = clip.dim(3);
  Tensor out({t_count, out_h, out_w, c});
  const Scalar* src = clip.data();
  Scalar* dst = out.data();
  for (int64_t t = 0; t < t_count; ++t)
    for (int64_t y = 0; y < out_h; ++y)
      std::copy(src + ((t * h + oy + y) * w + ox) * c,
                src + ((t * h + oy + y) * w + ox + out_w) * c,
                dst + ((t * out_h + y) * out_w) * c);
  return out;
}
}  // namespace

Tensor random_crop_consistent(const Tensor& clip, int out_h, int out_w, Rng& rng) {
  require_clip(clip);
  const int64_t h = clip.dim(1), w = clip.dim(2);
  if (out_h > h || out_w > w)
    throw CropLargerThanFrame(std::to_string(out_h) + "x" + std::to_string(out_w) +
                              " crop on " + std::to_string(h) + "x" + std::to_string(w));
  if (out_h == h && out_w == w) return clip;
  const int64_t oy = rng.uniform_int(0, h - out_h);
  const int64_t ox = rng.uniform_int(0, w - out_w);
  return crop_at(clip, oy, ox, out_h, out_w);
}

Tensor center_crop(const Tensor& clip, int out_h, int out_w) {
  require_clip(clip);
  const int64_t h = clip.dim(1), w = clip.dim(2);
  if (out_h > h || out_w > w)
    throw CropLargerThanFrame(std::to_string(out_h) + "x" + std::to_string(out_w) +
                              " crop on " + std::to_string(h) + "x" + std::to_string(w));
  return crop_at(clip, (h - out_h) / 2, (w - out_w) / 2, out_h, out_w);
}

Tensor hflip(const Tensor& clip, Rng& rng, double prob) {
  require_clip(clip);
  if (!rng.bernoulli(prob)) return clip;
  const int64_t t_count = clip.dim(0), h = clip.dim(1), w = clip.dim(2), c = clip.dim(3);
  Tensor out(clip.shape());
  const Scalar* src = clip.data();
  Scalar* dst = out.data();
  for (int64_t t = 0; t < t_count; ++t)
    for (int64_t y = 0; y < h; ++y)
      for (int64_t x = 0; x < w; ++x)
        for (int64_t ch = 0; ch < c; ++ch)
          dst[((t * h + y) * w + x) * c + ch] =
              src[((t * h + y) * w + (w - 1 - x)) * c + ch];
  return out;
}

Tensor temporal_jitter(const Tensor& clip, double per_frame_prob, Rng& rng) {
  require_clip(clip);
  if (clip.dim(0) < 2) throw InvalidArgument("temporal_jitter needs T >= 2");
  const int64_t t_count = clip.dim(0), h = clip.dim(1), w = clip.dim(2), c = clip.dim(3);

  std::vector<int64_t> kept;
  kept.reserve(static_cast<size_t>(t_count) * 2);
  for (int64_t t = 0; t < t_count; ++t) {
    const double u = rng.uniform();
    if (u < per_frame_prob) continue;                 // delete
    kept.push_back(t);
    if (u < 2.0 * per_frame_prob) kept.push_back(t);  // duplicate
  }
  if (kept.empty()) kept.push_back(0);  // floor rule: one frame always survives

  Tensor out({static_cast<int64_t>(kept.size()), h, w, c});
  const int64_t frame = h * w * c;
  for (size_t i = 0; i < kept.size(); ++i)
    std::copy(clip.data() + kept[i] * frame, clip.data() + (kept[i] + 1) * frame,
              out.data() + static_cast<int64_t>(i) * frame);
  return out;
}

nlohmann::json AugmentPolicy::to_json() const {
  nlohmann::json j;
  if (cutout) j["cutout"] = cutout->to_json();
  if (random_crop_to) j["random_crop_to"] = {random_crop_to->first, random_crop_to->second};
  j["hflip_prob"] = hflip_prob;
  j["temporal_jitter_prob"] = temporal_jitter_prob;
  return j;
}

AugmentPolicy AugmentPolicy::from_json(const nlohmann::json& j) {
  AugmentPolicy p;
  if (j.contains("cutout") && !j.at("cutout").is_null())
    p.cutout = CutoutConfig::from_json(j.at("cutout"));
  if (j.contains("random_crop_to") && !j.at("random_crop_to").is_null())
    p.random_crop_to = {j.at("random_crop_to").at(0).get<int>(),
                        j.at("random_crop_to").at(1).get<int>()};
  p.hflip_prob = j.value("hflip_prob", 0.0);
  p.temporal_jitter_prob = j.value("temporal_jitter_prob", 0.0);
  if (p.hflip_prob < 0 || p.hflip_prob > 1 || p.temporal_jitter_prob < 0 ||
      p.temporal_jitter_prob > 1)
    throw InvalidArgument("augment probabilities must be in [0,1]");
  return p;
}

Tensor apply_policy(const Tensor& clip, const AugmentPolicy& policy, Rng& rng,
                    bool training) {
  Tensor x = clip;
  if (training && policy.temporal_jitter_prob > 0.0 && x.dim(0) >= 2)
    x = temporal_jitter(x, policy.temporal_jitter_prob, rng);
  if (policy.random_crop_to) {
    const auto [ch, cw] = *policy.random_crop_to;
    x = training ? random_crop_consistent(x, ch, cw, rng) : center_crop(x, ch, cw);
  }
  if (training && policy.hflip_prob > 0.0) x = hflip(x, rng, policy.hflip_prob);
  if (training && policy.cutout) x = cutout(x, *policy.cutout, rng);
  return x;
}

}  // namespace facevsr::augment
