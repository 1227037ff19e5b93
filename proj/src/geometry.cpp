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

#include "facevsr/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace facevsr::geometry {

Point SimilarityTransform::apply(Point p) const {
  const double a = scale * std::cos(rotation);
  const double b = scale * std::sin(rotation);
  return {a * p.x - b * p.y + tx, b * p.x + a * p.y + ty};
}

SimilarityTransform SimilarityTransform::inverse() const {
  SimilarityTransform inv;
  inv.scale = 1.0 / scale;
  inv.rotation = -rotation;
  const double a = inv.scale * std::cos(inv.rotation);
  const double b = inv.scale * std::sin(inv.rotation);
  inv.tx = -(a * tx - b * ty);
  inv.ty = -(b * tx + a * ty);
  return inv;
}

std::array<double, 6> SimilarityTransform::matrix23() const {
  const double a = scale * std::cos(rotation);
  const double b = scale * std::sin(rotation);
  return {a, -b, tx, b, a, ty};
}

SimilarityTransform fit_similarity(std::span<const Point> src,
                                   std::span<const Point> dst) {
  if (src.size() != dst.size())
    throw InvalidArgument("fit_similarity: point count mismatch");
  const size_t n = src.size();
  if (n < 2) throw DegenerateConfiguration("need at least 2 point pairs");

  double mx = 0, my = 0, ux = 0, uy = 0;
  for (size_t i = 0; i < n; ++i) {
    mx += src[i].x; my += src[i].y;
    ux += dst[i].x; uy += dst[i].y;
  }
  mx /= static_cast<double>(n); my /= static_cast<double>(n);
  ux /= static_cast<double>(n); uy /= static_cast<double>(n);

  // Centered cross terms. With u = src - mean(src), v = dst - mean(dst):
  //   a = Σ u·v (dot), b = Σ u×v (cross), q = Σ|u|².
  // The optimum over rotation+scale (no reflection) is θ = atan2(b, a),
  // s = sqrt(a² + b²) / q.
  double a = 0, b = 0, q = 0;
  for (size_t i = 0; i < n; ++i) {
    const double sx = src[i].x - mx, sy = src[i].y - my;
    const double dx = dst[i].x - ux, dy = dst[i].y - uy;
    a += sx * dx + sy * dy;
    b += sx * dy - sy * dx;
    q += sx * sx + sy * sy;
  }
  if (q <= 0.0)
    throw DegenerateConfiguration("all source points coincide");

  SimilarityTransform t;
  t.rotation = std::atan2(b, a);
  t.scale = std::sqrt(a * a + b * b) / q;
  if (t.scale <= 0.0)
    throw DegenerateConfiguration("destination points coincide");
  const double ca = t.scale * std::cos(t.rotation);
  const double sa = t.scale * std::sin(t.rotation);
  t.tx = ux - (ca * mx - sa * my);
  t.ty = uy - (sa * mx + ca * my);
  return t;
}

FaceTemplate FaceTemplate::canonical(int out_h, int out_w) {
  FaceTemplate t;
  t.out_h = out_h;
  t.out_w = out_w;
  t.eye_left = {0.31 * out_w, 0.38 * out_h};
  t.eye_right = {0.69 * out_w, 0.38 * out_h};
  t.nose_tip = {0.50 * out_w, 0.60 * out_h};
  return t;
}

namespace ibug68 {

namespace {
// Indices below are 0-based; comments give the usual 1-based labels.
Point mean_of(const Tensor& pts, int64_t t, int first, int last) {
  Point p;
  const int n = last - first + 1;
  for (int i = first; i <= last; ++i) {
    if (pts.rank() == 3) {
      p.x += pts.at({t, i, 0});
      p.y += pts.at({t, i, 1});
    } else {
      p.x += pts.at({i, 0});
      p.y += pts.at({i, 1});
    }
  }
  p.x /= n;
  p.y /= n;
  return p;
}
Point point_at(const Tensor& pts, int64_t t, int i) {
  if (pts.rank() == 3) return {pts.at({t, i, 0}), pts.at({t, i, 1})};
  return {pts.at({i, 0}), pts.at({i, 1})};
}
}  // namespace

Point eye_center_left(const Tensor& pts, int64_t t) { return mean_of(pts, t, 36, 41); }   // 37..42
Point eye_center_right(const Tensor& pts, int64_t t) { return mean_of(pts, t, 42, 47); }  // 43..48
Point nose_tip(const Tensor& pts, int64_t t) { return point_at(pts, t, 30); }             // 31
Point mouth_center(const Tensor& pts, int64_t t) { return mean_of(pts, t, 48, 59); }      // 49..60

double cheek_center_y(const Tensor& pts, int64_t t) {
  // Landmarks 18, 27, 57, 59 (1-based): eyebrow outer ends and lower lip.
  const int idx[4] = {17, 26, 56, 58};
  double y = 0;
  for (int i : idx) y += point_at(pts, t, i).y;
  return y / 4.0;
}

}  // namespace ibug68

data::LandmarkTrack smooth_landmarks(const data::LandmarkTrack& track,
                                     double sigma_frames) {
  if (sigma_frames <= 0.0)
    throw InvalidArgument("sigma_frames must be positive");
  const int64_t t_count = track.frames();
  data::LandmarkTrack out = track;
  if (t_count <= 1) return out;

  const int radius = static_cast<int>(std::ceil(2.0 * sigma_frames));
  std::vector<double> taps(static_cast<size_t>(2 * radius + 1));
  for (int k = -radius; k <= radius; ++k)
    taps[static_cast<size_t>(k + radius)] =
        std::exp(-0.5 * (k * k) / (sigma_frames * sigma_frames));

  const int64_t l_count = track.landmark_count();
  for (int64_t t = 0; t < t_count; ++t) {
    const int64_t lo = std::max<int64_t>(0, t - radius);
    const int64_t hi = std::min<int64_t>(t_count - 1, t + radius);
    double norm = 0;
    for (int64_t s = lo; s <= hi; ++s) norm += taps[static_cast<size_t>(s - t + radius)];
    for (int64_t l = 0; l < l_count; ++l) {
      for (int64_t c = 0; c < 2; ++c) {
        double acc = 0;
        for (int64_t s = lo; s <= hi; ++s)
          acc += taps[static_cast<size_t>(s - t + radius)] * track.points.at({s, l, c});
        out.points.at({t, l, c}) = acc / norm;
      }
    }
  }
  return out;
}

Scalar sample_bilinear(const Tensor& image, double x, double y, int64_t channel) {
  const int64_t h = image.dim(0), w = image.dim(1), c = image.dim(2);
  const double fx = std::floor(x), fy = std::floor(y);
  const int64_t x0 = static_cast<int64_t>(fx), y0 = static_cast<int64_t>(fy);
  const double ax = x - fx, ay = y - fy;

  auto px = [&](int64_t yy, int64_t xx) -> Scalar {
    if (yy < 0 || yy >= h || xx < 0 || xx >= w) return 0.0;
    return image.data()[(yy * w + xx) * c + channel];
  };
  return (1 - ay) * ((1 - ax) * px(y0, x0) + ax * px(y0, x0 + 1)) +
         ay * ((1 - ax) * px(y0 + 1, x0) + ax * px(y0 + 1, x0 + 1));
}

Tensor warp_similarity(const Tensor& image, const SimilarityTransform& transform,
                       int out_h, int out_w) {
  const SimilarityTransform inv = transform.inverse();
  const auto m = inv.matrix23();
  const int64_t c = image.dim(2);
  Tensor out({out_h, out_w, c});
  Scalar* dst = out.data();
  for (int64_t y = 0; y < out_h; ++y) {
    for (int64_t x = 0; x < out_w; ++x) {
      const double sx = m[0] * x + m[1] * y + m[2];
      const double sy = m[3] * x + m[4] * y + m[5];
      for (int64_t ch = 0; ch < c; ++ch)
        dst[(y * out_w + x) * c + ch] = sample_bilinear(image, sx, sy, ch);
    }
  }
  return out;
}

Tensor crop_resize(const Tensor& image, double x0, double y0, double w, double h,
                   int out_h, int out_w) {
  if (w <= 0 || h <= 0) throw InvalidArgument("crop_resize: empty source window");
  const int64_t c = image.dim(2);
  Tensor out({out_h, out_w, c});
  const double sx = w / out_w;
  const double sy = h / out_h;
  Scalar* dst = out.data();
  for (int64_t y = 0; y < out_h; ++y) {
    const double src_y = y0 + (y + 0.5) * sy - 0.5;
    for (int64_t x = 0; x < out_w; ++x) {
      const double src_x = x0 + (x + 0.5) * sx - 0.5;
      for (int64_t ch = 0; ch < c; ++ch)
        dst[(y * out_w + x) * c + ch] = sample_bilinear(image, src_x, src_y, ch);
    }
  }
  return out;
}

AlignedFace align_face(const Tensor& frame, const Tensor& landmarks,
                       const FaceTemplate& face_template) {
  if (landmarks.rank() != 2 || landmarks.dim(1) != 2)
    throw InvalidArgument("align_face expects Lx2 landmarks");
  const Point src[3] = {ibug68::eye_center_left(landmarks),
                        ibug68::eye_center_right(landmarks),
                        ibug68::nose_tip(landmarks)};
  const Point dst[3] = {face_template.eye_left, face_template.eye_right,
                        face_template.nose_tip};
  const SimilarityTransform t = fit_similarity(src, dst);

  AlignedFace out;
  out.transform = t;
  out.image = warp_similarity(frame, t, face_template.out_h, face_template.out_w);
  return out;
}

Tensor transform_landmarks(const Tensor& landmarks, const SimilarityTransform& t) {
  Tensor out = landmarks;
  const int64_t l_count = landmarks.dim(0);
  for (int64_t l = 0; l < l_count; ++l) {
    const Point p = t.apply({landmarks.at({l, 0}), landmarks.at({l, 1})});
    out.at({l, 0}) = p.x;
    out.at({l, 1}) = p.y;
  }
  return out;
}

std::string to_string(RoiKind k) {
  switch (k) {
    case RoiKind::kMouthFixedBox: return "mouth_fixed_box";
    case RoiKind::kMouthCentered: return "mouth_centered";
    case RoiKind::kFaceAligned: return "face_aligned";
    case RoiKind::kFaceDirect: return "face_direct";
    case RoiKind::kUpperFace: return "upper_face";
    case RoiKind::kCheeks: return "cheeks";
  }
  return "face_aligned";
}

RoiKind roi_kind_from_string(const std::string& s) {
  if (s == "mouth_fixed_box") return RoiKind::kMouthFixedBox;
  if (s == "mouth_centered") return RoiKind::kMouthCentered;
  if (s == "face_aligned") return RoiKind::kFaceAligned;
  if (s == "face_direct") return RoiKind::kFaceDirect;
  if (s == "upper_face") return RoiKind::kUpperFace;
  if (s == "cheeks") return RoiKind::kCheeks;
  throw InvalidArgument("unknown RoI kind '" + s + "'");
}

nlohmann::json RoISpec::to_json() const {
  nlohmann::json j;
  j["kind"] = to_string(kind);
  j["out_size"] = {out_h, out_w};
  switch (kind) {
    case RoiKind::kCheeks: j["strip_height"] = strip_height; break;
    case RoiKind::kMouthCentered: j["box_size"] = box_size; break;
    case RoiKind::kMouthFixedBox:
    case RoiKind::kFaceDirect: j["box"] = box; break;
    default: break;
  }
  return j;
}

RoISpec RoISpec::from_json(const nlohmann::json& j) {
  RoISpec s;
  s.kind = roi_kind_from_string(j.at("kind").get<std::string>());
  s.out_h = j.at("out_size").at(0).get<int>();
  s.out_w = j.at("out_size").at(1).get<int>();
  if (s.out_h <= 0 || s.out_w <= 0) throw InvalidArgument("RoISpec out_size must be positive");
  if (j.contains("strip_height")) s.strip_height = j.at("strip_height").get<double>();
  if (j.contains("box_size")) s.box_size = j.at("box_size").get<double>();
  if (j.contains("box")) s.box = j.at("box").get<std::array<double, 4>>();
  if ((s.kind == RoiKind::kMouthFixedBox || s.kind == RoiKind::kFaceDirect) &&
      (s.box[2] <= 0 || s.box[3] <= 0))
    throw InvalidArgument("fixed-box RoI needs a box {x0,y0,w,h}");
  return s;
}

CropWindow roi_window(const Tensor& image, const Tensor& landmarks, const RoISpec& spec) {
  const double h = static_cast<double>(image.dim(0));
  const double w = static_cast<double>(image.dim(1));
  switch (spec.kind) {
    case RoiKind::kFaceAligned:
      return {0, 0, w, h};
    case RoiKind::kUpperFace:
      // Top half of the aligned face.
      return {0, 0, w, std::floor(h / 2.0)};
    case RoiKind::kCheeks: {
      const double cy = ibug68::cheek_center_y(landmarks);
      return {0, cy - spec.strip_height / 2.0, w, spec.strip_height};
    }
    case RoiKind::kMouthCentered: {
      const Point c = ibug68::mouth_center(landmarks);
      return {c.x - spec.box_size / 2.0, c.y - spec.box_size / 2.0,
              spec.box_size, spec.box_size};
    }
    case RoiKind::kMouthFixedBox:
    case RoiKind::kFaceDirect:
      return {spec.box[0], spec.box[1], spec.box[2], spec.box[3]};
  }
  return {0, 0, w, h};
}

Tensor crop_roi(const Tensor& image, const Tensor& landmarks, const RoISpec& spec) {
  const CropWindow win = roi_window(image, landmarks, spec);
  const double h = static_cast<double>(image.dim(0));
  const double w = static_cast<double>(image.dim(1));
  if (win.x0 + win.w <= 0 || win.x0 >= w || win.y0 + win.h <= 0 || win.y0 >= h)
    throw RegionOutOfFrame(to_string(spec.kind) + " window has no overlap with a " +
                           std::to_string(static_cast<int>(h)) + "x" +
                           std::to_string(static_cast<int>(w)) + " image");
  return crop_resize(image, win.x0, win.y0, win.w, win.h, spec.out_h, spec.out_w);
}

}  // namespace facevsr::geometry
