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

#include "facevsr/diagnose.hpp"

#include <algorithm>
#include <cmath>

#include "facevsr/png_io.hpp"

namespace facevsr::diagnose {

namespace {
Tensor as_batch(const Tensor& clip) {
  const auto& s = clip.shape();
  if (clip.rank() != 4) throw ShapeMismatch("expected TxHxWxC clip");
  return clip.reshaped({1, s[0], s[1], s[2], s[3]});
}
}  // namespace

FeatureMaps feature_maps(models::WordModel& model, const Tensor& clip,
                         const std::string& layer_id) {
  models::Context ctx;
  ctx.mode = models::Mode::kEval;
  const Tensor act = model.stage_activation(as_batch(clip), layer_id, ctx);  // 1,C,T,H,W
  const int64_t c = act.dim(1), t = act.dim(2), h = act.dim(3), w = act.dim(4);

  FeatureMaps out;
  out.layer_id = layer_id;
  out.maps = Tensor({t, h, w});
  for (int64_t s = 0; s < t; ++s)
    for (int64_t y = 0; y < h; ++y)
      for (int64_t x = 0; x < w; ++x) {
        double m = act.at({0, 0, s, y, x});
        for (int64_t ch = 1; ch < c; ++ch)
          m = std::max(m, act.at({0, ch, s, y, x}));
        out.maps.at({s, y, x}) = m;
      }

  const double lo = out.maps.min(), hi = out.maps.max();
  if (hi > lo)
    for (int64_t i = 0; i < out.maps.numel(); ++i)
      out.maps[i] = (out.maps[i] - lo) / (hi - lo);
  else
    out.maps.fill(0.0);
  return out;
}

namespace {

// Positive part, max-normalized per clip; channels are summed.
Tensor finalize_saliency(const Tensor& dinput) {
  const int64_t t = dinput.dim(1), h = dinput.dim(2), w = dinput.dim(3), c = dinput.dim(4);
  Tensor vol({t, h, w});
  for (int64_t s = 0; s < t; ++s)
    for (int64_t y = 0; y < h; ++y)
      for (int64_t x = 0; x < w; ++x) {
        double v = 0;
        for (int64_t ch = 0; ch < c; ++ch)
          v += std::max(0.0, dinput.at({0, s, y, x, ch}));
        vol.at({s, y, x}) = v;
      }
  const double hi = vol.max();
  if (hi > 0)
    for (int64_t i = 0; i < vol.numel(); ++i) vol[i] /= hi;
  return vol;
}

}  // namespace

SaliencyVolume guided_backprop_saliency(models::WordModel& model, const Tensor& clip,
                                        int target_class) {
  if (target_class < 0 || target_class >= model.config().vocab_size)
    throw InvalidArgument("target class out of range");
  models::Context ctx;
  ctx.mode = models::Mode::kEval;
  ctx.rule = models::BackpropRule::kGuided;

  Tensor batch = as_batch(clip);
  Tensor logits = model.forward(batch, ctx);
  Tensor dlogits(logits.shape());
  dlogits.at({0, target_class}) = 1.0;  // d(score of target)/d(logits)
  model.zero_grad();
  Tensor dinput = model.backward(dlogits, ctx);

  SaliencyVolume out;
  out.values = finalize_saliency(dinput);
  out.target = std::to_string(target_class);
  return out;
}

SaliencyVolume guided_backprop_saliency(models::SentenceModel& model, const Tensor& clip,
                                        const eval::Alphabet& alphabet,
                                        const std::optional<std::string>& target) {
  if (model.config().alphabet_size != alphabet.size())
    throw InvalidArgument("alphabet does not match the model's output layer");
  models::Context ctx;
  ctx.mode = models::Mode::kEval;
  ctx.rule = models::BackpropRule::kGuided;

  Tensor batch = as_batch(clip);
  Tensor logits = model.forward(batch, ctx);  // 1,T',A+1
  const int64_t t = logits.dim(1), a = logits.dim(2);
  const Tensor post = models::softmax(logits.reshaped({t, a}));

  // Per-step symbols of the greedy path (blanks included); the scalar is
  // Σ_t log p(symbol_t | x), so d/d(logits) is Σ_t ∇ log_softmax rows.
  std::vector<int> symbols(static_cast<size_t>(t));
  for (int64_t s = 0; s < t; ++s) {
    int arg = 0;
    for (int64_t c = 1; c < a; ++c)
      if (post.at({s, c}) > post.at({s, arg})) arg = static_cast<int>(c);
    symbols[static_cast<size_t>(s)] = arg;
  }

  Tensor dlogits({1, t, a});
  for (int64_t s = 0; s < t; ++s)
    for (int64_t c = 0; c < a; ++c)
      dlogits.at({0, s, c}) =
          (c == symbols[static_cast<size_t>(s)] ? 1.0 : 0.0) - post.at({s, c});

  model.zero_grad();
  Tensor dinput = model.backward(dlogits, ctx);

  SaliencyVolume out;
  out.values = finalize_saliency(dinput);
  out.target = target ? *target : eval::ctc_greedy(post, alphabet);
  return out;
}

// ---------------------------------------------------------------- occlusion

namespace {

double accuracy_with_mask(models::WordModel& model, const data::PreparedDataset& dataset,
                          data::Split split, int64_t y0, int64_t x0, int64_t mh,
                          int64_t mw, double fill) {
  models::Context ctx;
  ctx.mode = models::Mode::kEval;
  const auto indices = dataset.split_indices(split);
  int64_t correct = 0;
  for (int64_t idx : indices) {
    const auto& pc = dataset.clips[static_cast<size_t>(idx)];
    Tensor clip = pc.pixels;
    const int64_t t = clip.dim(0), h = clip.dim(1), w = clip.dim(2), c = clip.dim(3);
    const int64_t ya = std::max<int64_t>(0, y0), yb = std::min(h, y0 + mh);
    const int64_t xa = std::max<int64_t>(0, x0), xb = std::min(w, x0 + mw);
    for (int64_t s = 0; s < t; ++s)
      for (int64_t y = ya; y < yb; ++y)
        for (int64_t x = xa; x < xb; ++x)
          for (int64_t ch = 0; ch < c; ++ch)
            clip.data()[((s * h + y) * w + x) * c + ch] = fill;

    const auto& sp = clip.shape();
    Tensor batch = clip.reshaped({1, sp[0], sp[1], sp[2], sp[3]});
    Tensor logits = model.forward(batch, ctx);
    int arg = 0;
    for (int64_t cc = 1; cc < logits.dim(1); ++cc)
      if (logits.at({0, cc}) > logits.at({0, arg})) arg = static_cast<int>(cc);
    if (dataset.class_names[static_cast<size_t>(arg)] == pc.target) ++correct;
  }
  return indices.empty() ? 0.0 : static_cast<double>(correct) / indices.size();
}

}  // namespace

std::pair<int64_t, int64_t> OcclusionHeatmap::argmax_cell() const {
  int64_t best = 0;
  for (int64_t i = 1; i < drops.numel(); ++i)
    if (drops[i] > drops[best]) best = i;
  return {best / drops.dim(1), best % drops.dim(1)};
}

std::pair<double, double> OcclusionHeatmap::cell_center(int64_t gy, int64_t gx) const {
  return {gy * stride + patch / 2.0, gx * stride + patch / 2.0};
}

nlohmann::json OcclusionHeatmap::to_json() const {
  nlohmann::json grid = nlohmann::json::array();
  for (int64_t y = 0; y < drops.dim(0); ++y) {
    nlohmann::json row = nlohmann::json::array();
    for (int64_t x = 0; x < drops.dim(1); ++x) row.push_back(drops.at({y, x}));
    grid.push_back(std::move(row));
  }
  return {{"patch", patch}, {"stride", stride}, {"baseline", baseline}, {"drops", grid}};
}

OcclusionHeatmap occlusion_heatmap(models::WordModel& model,
                                   const data::PreparedDataset& dataset,
                                   data::Split split, int patch, int stride, double fill) {
  if (dataset.clips.empty()) throw InvalidArgument("empty dataset");
  const int64_t h = dataset.clips.front().pixels.dim(1);
  const int64_t w = dataset.clips.front().pixels.dim(2);
  if (patch > h || patch > w)
    throw PatchLargerThanFrame(std::to_string(patch) + " patch on " + std::to_string(h) +
                               "x" + std::to_string(w) + " inputs");
  if (stride < 1) throw InvalidArgument("stride must be >= 1");

  OcclusionHeatmap hm;
  hm.patch = patch;
  hm.stride = stride;
  hm.baseline = accuracy_with_mask(model, dataset, split, 0, 0, 0, 0, fill);

  const int64_t gh = (h - patch) / stride + 1;
  const int64_t gw = (w - patch) / stride + 1;
  hm.drops = Tensor({gh, gw});
  for (int64_t gy = 0; gy < gh; ++gy)
    for (int64_t gx = 0; gx < gw; ++gx) {
      const double acc = accuracy_with_mask(model, dataset, split, gy * stride,
                                            gx * stride, patch, patch, fill);
      hm.drops.at({gy, gx}) = hm.baseline - acc;
    }
  return hm;
}

double occluded_accuracy(models::WordModel& model, const data::PreparedDataset& dataset,
                         data::Split split, double x0, double y0, double w, double h,
                         double fill) {
  return accuracy_with_mask(model, dataset, split, static_cast<int64_t>(std::floor(y0)),
                            static_cast<int64_t>(std::floor(x0)),
                            static_cast<int64_t>(std::ceil(h)),
                            static_cast<int64_t>(std::ceil(w)), fill);
}

void write_heatmap_png(const std::string& path, const Tensor& grid, int upscale) {
  if (grid.rank() != 2) throw InvalidArgument("heatmap grid must be 2-d");
  const int64_t h = grid.dim(0), w = grid.dim(1);
  const double lo = grid.min(), hi = grid.max();
  const double span = hi > lo ? hi - lo : 1.0;

  Tensor img({h * upscale, w * upscale, 3});
  for (int64_t y = 0; y < h * upscale; ++y)
    for (int64_t x = 0; x < w * upscale; ++x) {
      const double v = (grid.at({y / upscale, x / upscale}) - lo) / span;
      // intensity ramp: dark blue at 0, warm yellow at 1
      img.at({y, x, 0}) = std::clamp(1.8 * v - 0.2, 0.0, 1.0);
      img.at({y, x, 1}) = std::clamp(1.4 * v - 0.1, 0.0, 1.0);
      img.at({y, x, 2}) = std::clamp(0.7 - 0.5 * v, 0.0, 1.0);
    }
  write_png(path, img);
}

}  // namespace facevsr::diagnose
