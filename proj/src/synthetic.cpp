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

#include "facevsr/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "facevsr/errors.hpp"
#include "facevsr/png_io.hpp"
#include "facevsr/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace facevsr::data {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Per-clip rigid jitter bounds (canvas-relative where noted).
constexpr double kMaxRollDeg = 6.0;
constexpr double kScaleLo = 0.96, kScaleHi = 1.04;
constexpr double kMaxShiftFrac = 0.02;   // of canvas width
constexpr double kMaxYawDeg = 65.0;
constexpr double kYawSquash = 0.15;      // x-compression at max yaw

// Canonical face geometry, as fractions of the canvas. Eye and nose
// fractions equal the alignment template constants so a jitter-free face
// registers to the template with a pure scale.
struct Geometry {
  double W, H;
  double eye_y() const { return 0.38 * H; }
  double eye_lx() const { return 0.31 * W; }
  double eye_rx() const { return 0.69 * W; }
  double eye_rxr() const { return 0.055 * W; }
  double eye_ryr() const { return 0.035 * H; }
  double nose_x() const { return 0.50 * W; }
  double nose_tip_y() const { return 0.60 * H; }
  double mouth_x() const { return 0.50 * W; }
  double mouth_y() const { return 0.77 * H; }
  double mouth_rw(double open) const { return 0.16 * W * (1.0 - 0.10 * open); }
  double mouth_rh(double open) const { return (0.020 + 0.050 * open) * H; }
  double cheek_y() const { return 0.60 * H; }
  double cheek_lx() const { return 0.26 * W; }
  double cheek_rx() const { return 0.74 * W; }
  double cheek_r(double v) const { return 0.045 * W * (0.55 + 0.75 * v); }
  double brow_y(double raise) const { return (0.29 - 0.04 * raise) * H; }
  double brow_half() const { return 0.085 * W; }
  double brow_thick() const { return 0.016 * H; }
  double face_cx() const { return 0.50 * W; }
  double face_cy() const { return 0.52 * H; }
  double face_rx() const { return 0.40 * W; }
  double face_ry() const { return 0.46 * H; }
};

// One region's motion trajectory: value(t) = clamp(base + amp·sin(2π f t/T + phase)).
struct Signature {
  double freq = 1.0, base = 0.5, amp = 0.35, phase = 0.0;
  double value(double t, double t_total) const {
    const double v = base + amp * std::sin(2.0 * kPi * freq * t / t_total + phase);
    return std::clamp(v, 0.0, 1.0);
  }
};

// Distinct deterministic pattern per class: frequency cycles through 1..4,
// the baseline steps through tiers, so both the spectrum and the mean of
// the trajectory separate the classes.
Signature class_signature(int cls, int num_classes) {
  Signature s;
  s.freq = 1.0 + static_cast<double>(cls % 4);
  const int tier = cls / 4;
  const int tiers = (num_classes + 3) / 4;
  s.base = tiers <= 1 ? 0.5 : 0.22 + 0.56 * static_cast<double>(tier) / (tiers - 1);
  s.amp = 0.35;
  return s;
}

Signature distractor_signature(Rng& rng) {
  Signature s;
  s.freq = static_cast<double>(rng.uniform_int(1, 4));
  s.base = rng.uniform(0.2, 0.8);
  s.amp = 0.35;
  s.phase = rng.uniform(0.0, 2.0 * kPi);
  return s;
}

struct ClipParams {
  double roll = 0, scale = 1, tx = 0, ty = 0;  // similarity jitter about canvas center
  double yaw_deg = 0, squash = 1;
  Signature mouth, cheek, brow;
};

struct P2 { double x, y; };

// Canonical -> canvas map: similarity jitter about the canvas center,
// composed with the yaw squash toward the vertical center line.
P2 map_fwd(const ClipParams& cp, const Geometry& g, P2 q) {
  const double cx = g.W / 2.0, cy = g.H / 2.0;
  const double xs = cx + (q.x - cx) * cp.squash;
  const double c = std::cos(cp.roll), s = std::sin(cp.roll);
  const double dx = xs - cx, dy = q.y - cy;
  return {cx + cp.scale * (c * dx - s * dy) + cp.tx,
          cy + cp.scale * (s * dx + c * dy) + cp.ty};
}

P2 map_inv(const ClipParams& cp, const Geometry& g, P2 p) {
  const double cx = g.W / 2.0, cy = g.H / 2.0;
  const double c = std::cos(-cp.roll), s = std::sin(-cp.roll);
  const double dx = (p.x - cp.tx - cx) / cp.scale, dy = (p.y - cp.ty - cy) / cp.scale;
  const double rx = c * dx - s * dy, ry = s * dx + c * dy;
  return {cx + rx / cp.squash, cy + ry};
}

double smoothstep(double e0, double e1, double x) {
  const double t = std::clamp((x - e0) / (e1 - e0), 0.0, 1.0);
  return t * t * (3.0 - 2.0 * t);
}

// Soft-edged ellipse coverage at point (x,y); edge width ~1.2px.
double ellipse_alpha(double x, double y, double cx, double cy, double rx, double ry) {
  const double dx = (x - cx) / rx, dy = (y - cy) / ry;
  const double d = std::sqrt(dx * dx + dy * dy);
  const double edge = 1.2 / std::max(1.0, std::min(rx, ry));
  return 1.0 - smoothstep(1.0 - edge, 1.0 + edge, d);
}

// Soft horizontal capsule (brow / nose strokes).
double capsule_alpha(double x, double y, double x0, double x1, double yc, double r) {
  const double px = std::clamp(x, x0, x1);
  const double dx = x - px, dy = y - yc;
  const double d = std::sqrt(dx * dx + dy * dy);
  return 1.0 - smoothstep(r - 0.8, r + 0.8, d);
}

struct MotionState {
  double open, cheek, brow;
};

double paint(const Geometry& g, const MotionState& m, P2 q) {
  double v = 0.10;  // background
  auto over = [&v](double value, double alpha) { v = v + (value - v) * alpha; };

  over(0.55, ellipse_alpha(q.x, q.y, g.face_cx(), g.face_cy(), g.face_rx(), g.face_ry()));

  // cheek patches brighten with the cheek signal
  const double cr = g.cheek_r(m.cheek);
  over(0.55 + 0.25 * m.cheek, ellipse_alpha(q.x, q.y, g.cheek_lx(), g.cheek_y(), cr, cr));
  over(0.55 + 0.25 * m.cheek, ellipse_alpha(q.x, q.y, g.cheek_rx(), g.cheek_y(), cr, cr));

  // nose stroke + tip
  over(0.40, capsule_alpha(q.y, q.x, 0.47 * g.H, 0.585 * g.H, g.nose_x(), 0.012 * g.W + 0.5));
  over(0.35, ellipse_alpha(q.x, q.y, g.nose_x(), g.nose_tip_y(), 0.030 * g.W, 0.018 * g.H));

  // mouth: dark lips, darker interior scaling with openness
  const double rw = g.mouth_rw(m.open), rh = g.mouth_rh(m.open);
  over(0.25, ellipse_alpha(q.x, q.y, g.mouth_x(), g.mouth_y(), rw, rh));
  over(0.06, ellipse_alpha(q.x, q.y, g.mouth_x(), g.mouth_y(), 0.72 * rw, 0.62 * rh));

  // eyes
  over(0.13, ellipse_alpha(q.x, q.y, g.eye_lx(), g.eye_y(), g.eye_rxr(), g.eye_ryr()));
  over(0.13, ellipse_alpha(q.x, q.y, g.eye_rx(), g.eye_y(), g.eye_rxr(), g.eye_ryr()));

  // eyebrows rise with the brow signal
  const double by = g.brow_y(m.brow);
  over(0.18, capsule_alpha(q.x, q.y, g.eye_lx() - g.brow_half(), g.eye_lx() + g.brow_half(), by, g.brow_thick()));
  over(0.18, capsule_alpha(q.x, q.y, g.eye_rx() - g.brow_half(), g.eye_rx() + g.brow_half(), by, g.brow_thick()));

  return std::clamp(v, 0.0, 1.0);
}

// ibug-68 landmarks for the canonical face under a motion state.
std::vector<P2> canonical_landmarks(const Geometry& g, const MotionState& m) {
  std::vector<P2> pts;
  pts.reserve(68);

  // 1..17 jaw, left ear over the chin to the right ear
  for (int i = 0; i < 17; ++i) {
    const double th = (170.0 + 200.0 * i / 16.0) * kPi / 180.0;
    pts.push_back({g.face_cx() + g.face_rx() * std::cos(th),
                   g.face_cy() + g.face_ry() * std::sin(th)});
  }
  // 18..22 left brow (18 = outer end), 23..27 right brow (27 = outer end)
  const double by = g.brow_y(m.brow);
  for (int i = 0; i < 5; ++i)
    pts.push_back({g.eye_lx() - g.brow_half() + 2.0 * g.brow_half() * i / 4.0, by});
  for (int i = 0; i < 5; ++i)
    pts.push_back({g.eye_rx() - g.brow_half() + 2.0 * g.brow_half() * i / 4.0, by});
  // 28..31 nose ridge (31 = tip), 32..36 nostril base
  for (int i = 0; i < 4; ++i)
    pts.push_back({g.nose_x(), 0.44 * g.H + (g.nose_tip_y() - 0.44 * g.H) * i / 3.0});
  for (int i = 0; i < 5; ++i)
    pts.push_back({g.nose_x() + 0.045 * g.W * (i - 2) / 2.0, 0.635 * g.H});
  // 37..42 left eye ring, 43..48 right eye ring (means are the eye centers)
  const double eye_angles[6] = {180, 120, 60, 0, 300, 240};
  for (double cx : {g.eye_lx(), g.eye_rx()})
    for (double a : eye_angles) {
      const double th = a * kPi / 180.0;
      pts.push_back({cx + g.eye_rxr() * std::cos(th), g.eye_y() + g.eye_ryr() * std::sin(th)});
    }
  // 49..60 outer lip ring; bottom arc carries positive sin (y down)
  const double rw = g.mouth_rw(m.open), rh = g.mouth_rh(m.open);
  for (int i = 0; i < 12; ++i) {
    const double th = (180.0 + 30.0 * i) * kPi / 180.0;
    pts.push_back({g.mouth_x() + rw * std::cos(th), g.mouth_y() + rh * std::sin(th)});
  }
  // 61..68 inner lip ring
  for (int i = 0; i < 8; ++i) {
    const double th = (180.0 + 45.0 * i) * kPi / 180.0;
    pts.push_back({g.mouth_x() + 0.72 * rw * std::cos(th), g.mouth_y() + 0.62 * rh * std::sin(th)});
  }
  return pts;
}

MotionState motion_at(const ClipParams& cp, double t, double t_total) {
  return {cp.mouth.value(t, t_total), cp.cheek.value(t, t_total),
          cp.brow.value(t, t_total)};
}

Tensor render_frame(const Geometry& g, const ClipParams& cp, const MotionState& m) {
  const int h = static_cast<int>(g.H), w = static_cast<int>(g.W);
  Tensor img({h, w, 1});
  Scalar* px = img.data();
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      px[y * w + x] = paint(g, m, map_inv(cp, g, {static_cast<double>(x), static_cast<double>(y)}));
  return img;
}

}  // namespace

std::string to_string(CueRegion r) {
  switch (r) {
    case CueRegion::kMouth: return "mouth";
    case CueRegion::kCheeks: return "cheeks";
    case CueRegion::kUpperFace: return "upper_face";
  }
  return "mouth";
}

CueRegion cue_region_from_string(const std::string& s) {
  if (s == "mouth") return CueRegion::kMouth;
  if (s == "cheeks") return CueRegion::kCheeks;
  if (s == "upper_face") return CueRegion::kUpperFace;
  throw InvalidArgument("unknown cue region '" + s + "'");
}

void SyntheticSpec::validate() const {
  if (num_classes < 2) throw InvalidArgument("num_classes must be >= 2");
  if (cue_regions.empty()) throw InvalidArgument("cue_regions must be nonempty");
  if (frames < 2) throw InvalidArgument("frames must be >= 2");
  if (canvas_h < 32 || canvas_w < 32)
    throw InvalidArgument("canvas must be at least 32x32");
  if (clips_per_class < 3) throw InvalidArgument("clips_per_class must be >= 3");
  if (task != "word" && task != "sentence")
    throw InvalidArgument("task must be word or sentence");
  if (task == "sentence" && (sentence_words < 1 || sentence_clips < 3))
    throw InvalidArgument("invalid sentence grammar settings");
}

json SyntheticSpec::to_json() const {
  json regions = json::array();
  for (auto r : cue_regions) regions.push_back(to_string(r));
  return {{"num_classes", num_classes}, {"cue_regions", regions},
          {"redundancy", redundancy},   {"frames", frames},
          {"canvas", {canvas_h, canvas_w}}, {"seed", seed},
          {"clips_per_class", clips_per_class}, {"task", task},
          {"sentence_words", sentence_words}, {"sentence_clips", sentence_clips}};
}

SyntheticSpec SyntheticSpec::from_json(const json& j) {
  SyntheticSpec s;
  s.num_classes = j.value("num_classes", 8);
  if (j.contains("cue_regions")) {
    s.cue_regions.clear();
    for (const auto& r : j.at("cue_regions"))
      s.cue_regions.push_back(cue_region_from_string(r.get<std::string>()));
  }
  s.redundancy = j.value("redundancy", false);
  s.frames = j.value("frames", 16);
  if (j.contains("canvas")) {
    s.canvas_h = j.at("canvas").at(0).get<int>();
    s.canvas_w = j.at("canvas").at(1).get<int>();
  }
  s.seed = j.value("seed", uint64_t{0});
  s.clips_per_class = j.value("clips_per_class", 40);
  s.task = j.value("task", "word");
  s.sentence_words = j.value("sentence_words", 3);
  s.sentence_clips = j.value("sentence_clips", 120);
  s.validate();
  return s;
}

json FaceLayout::to_json() const {
  return {{"canvas", {canvas_h, canvas_w}},
          {"mouth", mouth.to_json()},
          {"cheek_left", cheek_left.to_json()},
          {"cheek_right", cheek_right.to_json()},
          {"upper_face", upper_face.to_json()}};
}

FaceLayout FaceLayout::from_json(const json& j) {
  FaceLayout l;
  l.canvas_h = j.at("canvas").at(0).get<int>();
  l.canvas_w = j.at("canvas").at(1).get<int>();
  l.mouth = Box::from_json(j.at("mouth"));
  l.cheek_left = Box::from_json(j.at("cheek_left"));
  l.cheek_right = Box::from_json(j.at("cheek_right"));
  l.upper_face = Box::from_json(j.at("upper_face"));
  return l;
}

namespace {

// Bounding box in canvas space of a canonical-space rectangle under every
// admissible jitter, padded for the soft edges.
Box jitter_union(const Geometry& g, double x0, double y0, double x1, double y1,
                 double pad) {
  double lo_x = 1e9, lo_y = 1e9, hi_x = -1e9, hi_y = -1e9;
  ClipParams cp;
  for (double roll : {-kMaxRollDeg, 0.0, kMaxRollDeg})
    for (double scale : {kScaleLo, kScaleHi})
      for (double sx : {-1.0, 1.0})
        for (double sy : {-1.0, 1.0})
          for (double squash : {1.0 - kYawSquash, 1.0}) {
            cp.roll = roll * kPi / 180.0;
            cp.scale = scale;
            cp.tx = sx * kMaxShiftFrac * g.W;
            cp.ty = sy * kMaxShiftFrac * g.W;
            cp.squash = squash;
            for (double cx : {x0, x1})
              for (double cy : {y0, y1}) {
                const P2 p = map_fwd(cp, g, {cx, cy});
                lo_x = std::min(lo_x, p.x); hi_x = std::max(hi_x, p.x);
                lo_y = std::min(lo_y, p.y); hi_y = std::max(hi_y, p.y);
              }
          }
  return {lo_x - pad, lo_y - pad, hi_x - lo_x + 2 * pad, hi_y - lo_y + 2 * pad};
}

}  // namespace

FaceLayout synthetic_layout(const SyntheticSpec& spec) {
  Geometry g{static_cast<double>(spec.canvas_w), static_cast<double>(spec.canvas_h)};
  FaceLayout l;
  l.canvas_h = spec.canvas_h;
  l.canvas_w = spec.canvas_w;

  const double rw = g.mouth_rw(0.0);  // widest at closed
  const double rh = g.mouth_rh(1.0);  // tallest fully open
  l.mouth = jitter_union(g, g.mouth_x() - rw, g.mouth_y() - rh,
                         g.mouth_x() + rw, g.mouth_y() + rh, 2.0);

  const double cr = g.cheek_r(1.0);
  l.cheek_left = jitter_union(g, g.cheek_lx() - cr, g.cheek_y() - cr,
                              g.cheek_lx() + cr, g.cheek_y() + cr, 2.0);
  l.cheek_right = jitter_union(g, g.cheek_rx() - cr, g.cheek_y() - cr,
                               g.cheek_rx() + cr, g.cheek_y() + cr, 2.0);
  l.upper_face = {0, 0, static_cast<double>(spec.canvas_w), 0.50 * spec.canvas_h};
  return l;
}

std::vector<std::string> synthetic_vocabulary(int num_classes) {
  static const char* kWords[] = {"bin", "lay", "place", "set",   "blue", "green",
                                 "red", "white", "soon", "now",  "again", "please"};
  std::vector<std::string> v;
  for (int i = 0; i < num_classes; ++i) {
    if (i < static_cast<int>(std::size(kWords)))
      v.emplace_back(kWords[i]);
    else
      v.emplace_back("word" + std::to_string(i));
  }
  return v;
}

namespace {

bool region_uses_class(const SyntheticSpec& spec, CueRegion region) {
  const auto& rs = spec.cue_regions;
  const bool listed = std::find(rs.begin(), rs.end(), region) != rs.end();
  if (!listed) return false;
  if (spec.redundancy) return true;
  return region == rs.front();  // discriminative motion in one region only
}

// Draw order inside a clip is fixed: jitter first, then one signature per
// region, so streams stay aligned whether or not a region uses the class.
ClipParams draw_clip_params(const SyntheticSpec& spec, Rng& rng,
                            const std::vector<int>& word_classes) {
  ClipParams cp;
  cp.roll = rng.uniform(-kMaxRollDeg, kMaxRollDeg) * kPi / 180.0;
  cp.scale = rng.uniform(kScaleLo, kScaleHi);
  cp.tx = rng.uniform(-1.0, 1.0) * kMaxShiftFrac * spec.canvas_w;
  cp.ty = rng.uniform(-1.0, 1.0) * kMaxShiftFrac * spec.canvas_w;
  cp.yaw_deg = rng.uniform(0.0, kMaxYawDeg);
  cp.squash = 1.0 - kYawSquash * cp.yaw_deg / kMaxYawDeg;

  auto draw_for = [&](CueRegion region) -> Signature {
    if (region_uses_class(spec, region)) {
      // single-word clip: the class pattern with a small phase jitter
      Signature s = class_signature(word_classes.front(), spec.num_classes);
      s.phase = rng.uniform(0.0, 0.6);
      s.amp *= rng.uniform(0.9, 1.1);
      return s;
    }
    return distractor_signature(rng);
  };
  cp.mouth = draw_for(CueRegion::kMouth);
  cp.cheek = draw_for(CueRegion::kCheeks);
  cp.brow = draw_for(CueRegion::kUpperFace);
  return cp;
}

MotionState sentence_motion(const SyntheticSpec& spec, const ClipParams& cp,
                            const std::vector<int>& words,
                            const std::vector<Signature>& word_phase_jitter,
                            double t) {
  // The clip is divided into equal segments, one word pattern per segment.
  const double seg = static_cast<double>(spec.frames) / words.size();
  const size_t wi = std::min(words.size() - 1, static_cast<size_t>(t / seg));
  Signature s = class_signature(words[wi], spec.num_classes);
  s.phase = word_phase_jitter[wi].phase;
  const double local_t = t - wi * seg;

  MotionState m{};
  m.open = region_uses_class(spec, CueRegion::kMouth) ? s.value(local_t, seg)
                                                      : cp.mouth.value(t, spec.frames);
  m.cheek = region_uses_class(spec, CueRegion::kCheeks) ? s.value(local_t, seg)
                                                        : cp.cheek.value(t, spec.frames);
  m.brow = region_uses_class(spec, CueRegion::kUpperFace) ? s.value(local_t, seg)
                                                          : cp.brow.value(t, spec.frames);
  return m;
}

struct ClipPlan {
  std::string clip_id;
  std::vector<int> words;  // one entry for the word task
  Split split;
};

void write_clip(const SyntheticSpec& spec, const Geometry& g, const ClipPlan& plan,
                Rng& clip_rng, const std::string& out_dir, Manifest& manifest,
                const std::vector<std::string>& vocab) {
  ClipParams cp = draw_clip_params(spec, clip_rng, plan.words);

  std::vector<Signature> word_jitter;
  if (spec.task == "sentence")
    for (size_t i = 0; i < plan.words.size(); ++i) {
      Signature s;
      s.phase = clip_rng.uniform(0.0, 0.6);
      word_jitter.push_back(s);
    }

  const fs::path clip_dir = fs::path(out_dir) / "clips" / plan.clip_id;
  fs::create_directories(clip_dir);

  LandmarkTrack track;
  track.points = Tensor({spec.frames, 68, 2});
  track.confidence.assign(static_cast<size_t>(spec.frames), 1.0);

  for (int t = 0; t < spec.frames; ++t) {
    const MotionState m = spec.task == "sentence"
        ? sentence_motion(spec, cp, plan.words, word_jitter, t)
        : motion_at(cp, t, spec.frames);
    Tensor frame = render_frame(g, cp, m);

    char name[32];
    std::snprintf(name, sizeof(name), "frame_%04d.png", t);
    write_png((clip_dir / name).string(), frame);

    const auto lms = canonical_landmarks(g, m);
    for (int l = 0; l < 68; ++l) {
      const P2 p = map_fwd(cp, g, lms[static_cast<size_t>(l)]);
      track.points.at({t, l, 0}) = p.x;
      track.points.at({t, l, 1}) = p.y;
    }
  }
  save_landmarks(track, (clip_dir / "landmarks.json").string());

  ManifestEntry e;
  e.clip_id = plan.clip_id;
  // corpus-relative paths keep trees byte-identical across output roots
  e.frames_path = (fs::path("clips") / plan.clip_id).string();
  e.landmarks_path = (fs::path("clips") / plan.clip_id / "landmarks.json").string();
  e.base_dir = out_dir;
  if (spec.task == "word") {
    e.label = vocab[static_cast<size_t>(plan.words.front())];
  } else {
    std::string tr;
    for (size_t i = 0; i < plan.words.size(); ++i) {
      if (i) tr += " ";
      tr += vocab[static_cast<size_t>(plan.words[i])];
    }
    e.transcript = tr;
  }
  e.split = plan.split;
  e.yaw_deg = cp.yaw_deg;
  e.duration_frames = spec.frames;
  manifest.entries.push_back(std::move(e));
}

Split split_for_index(int idx, int total) {
  // 70 / 10 / 20 with at least one clip in val and test
  const int n_test = std::max(1, static_cast<int>(std::lround(0.2 * total)));
  const int n_val = std::max(1, static_cast<int>(std::lround(0.1 * total)));
  const int n_train = total - n_val - n_test;
  if (idx < n_train) return Split::kTrain;
  if (idx < n_train + n_val) return Split::kVal;
  return Split::kTest;
}

}  // namespace

SyntheticDataset generate_synthetic(const SyntheticSpec& spec,
                                    const std::string& out_dir) {
  spec.validate();
  Geometry g{static_cast<double>(spec.canvas_w), static_cast<double>(spec.canvas_h)};
  fs::create_directories(fs::path(out_dir) / "clips");

  const auto vocab = synthetic_vocabulary(spec.num_classes);
  std::vector<ClipPlan> plans;

  Rng corpus_rng(Rng::mix(spec.seed, 0xFACEu));
  if (spec.task == "word") {
    for (int c = 0; c < spec.num_classes; ++c)
      for (int k = 0; k < spec.clips_per_class; ++k) {
        char id[64];
        std::snprintf(id, sizeof(id), "%s_%03d", vocab[static_cast<size_t>(c)].c_str(), k);
        plans.push_back({id, {c}, split_for_index(k, spec.clips_per_class)});
      }
  } else {
    for (int k = 0; k < spec.sentence_clips; ++k) {
      std::vector<int> words;
      for (int i = 0; i < spec.sentence_words; ++i)
        words.push_back(static_cast<int>(corpus_rng.uniform_int(0, spec.num_classes - 1)));
      char id[64];
      std::snprintf(id, sizeof(id), "sent_%04d", k);
      plans.push_back({id, words, split_for_index(k, spec.sentence_clips)});
    }
  }

  SyntheticDataset ds;
  ds.layout = synthetic_layout(spec);
  ds.class_names = vocab;
  ds.root = out_dir;

  for (size_t i = 0; i < plans.size(); ++i) {
    // Per-clip stream keyed by the clip index only, so content draws stay
    // independent of how other clips consumed randomness.
    Rng clip_rng(Rng::mix(spec.seed, 0x9000u + i));
    write_clip(spec, g, plans[i], clip_rng, out_dir, ds.manifest, vocab);
  }

  ds.manifest_path = (fs::path(out_dir) / "manifest.jsonl").string();
  save_manifest(ds.manifest, ds.manifest_path);

  json meta;
  meta["spec"] = spec.to_json();
  meta["layout"] = ds.layout.to_json();
  meta["classes"] = vocab;
  std::ofstream lf(fs::path(out_dir) / "layout.json", std::ios::binary);
  if (!lf) throw IoError("cannot write layout.json under " + out_dir);
  lf << meta.dump(2) << "\n";

  return ds;
}

}  // namespace facevsr::data
