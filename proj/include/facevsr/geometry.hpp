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

#ifndef FACEVSR_GEOMETRY_HPP_
#define FACEVSR_GEOMETRY_HPP_

#include <array>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "facevsr/manifest.hpp"
#include "facevsr/tensor.hpp"

namespace facevsr::geometry {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

/// Rotation + uniform scale + translation. Maps p to scale·R(rotation)·p + t.
/// The linear part never contains shear or reflection (scale > 0).
struct SimilarityTransform {
  double scale = 1.0;
  double rotation = 0.0;  // radians, counter-clockwise in (x right, y down)
  double tx = 0.0;
  double ty = 0.0;

  Point apply(Point p) const;
  SimilarityTransform inverse() const;
  /// Row-major 2x3 matrix [a -b tx; b a ty] with a = s·cosθ, b = s·sinθ.
  std::array<double, 6> matrix23() const;

  static SimilarityTransform identity() { return {}; }
};

/// Least-squares similarity transform T minimizing Σ‖T(src_i) − dst_i‖².
/// Closed form from the 2×2 cross-covariance; reflections are excluded by
/// construction. Throws DegenerateConfiguration when all src points
/// coincide (or fewer than 2 pairs are given).
SimilarityTransform fit_similarity(std::span<const Point> src,
                                   std::span<const Point> dst);

/// Canonical landmark targets inside an out_h×out_w frame. The constants
/// (documented in docs/geometry.md) put the eye centers at (0.31·W, 0.38·H)
/// and (0.69·W, 0.38·H) and the nose tip at (0.50·W, 0.60·H).
struct FaceTemplate {
  Point eye_left;   // subject's left eye as seen in the image (smaller x)
  Point eye_right;
  Point nose_tip;
  int out_h = 0;
  int out_w = 0;

  static FaceTemplate canonical(int out_h, int out_w);
  /// 122×122 frame used for word-level training (random 112 crops later).
  static FaceTemplate word_level() { return canonical(122, 122); }
  /// 100×100 frame used for sentence-level input.
  static FaceTemplate sentence_level() { return canonical(100, 100); }
};

/// ibug-68 landmark conventions used throughout (indices are 1-based in
/// comments, 0-based in code).
namespace ibug68 {
constexpr int kCount = 68;
Point eye_center_left(const Tensor& pts, int64_t t = -1);   // mean of 37..42
Point eye_center_right(const Tensor& pts, int64_t t = -1);  // mean of 43..48
Point nose_tip(const Tensor& pts, int64_t t = -1);          // landmark 31
Point mouth_center(const Tensor& pts, int64_t t = -1);      // mean of 49..60
/// Mean y of landmarks {18, 27, 57, 59}: the cheek-strip vertical center.
double cheek_center_y(const Tensor& pts, int64_t t = -1);
}  // namespace ibug68

/// Convolves every coordinate sequence with a normalized temporal Gaussian.
/// Kernel radius is ceil(2·sigma); taps truncated at the clip edges are
/// renormalized, so constants pass through unchanged. Default sigma gives
/// the 3-tap kernel.
data::LandmarkTrack smooth_landmarks(const data::LandmarkTrack& track,
                                     double sigma_frames = 0.5);

/// Bilinear sample with zero fill outside the image. (x, y) are pixel
/// coordinates; integer coordinates address pixel centers.
Scalar sample_bilinear(const Tensor& image, double x, double y, int64_t channel);

/// Warps `image` so that warped(p) = image(transform⁻¹(p)), bilinear with
/// zero fill, into an out_h×out_w frame.
Tensor warp_similarity(const Tensor& image, const SimilarityTransform& transform,
                       int out_h, int out_w);

/// Bilinear resize of the axis-aligned source rectangle [x0,x0+w)×[y0,y0+h)
/// to out_h×out_w. Regions outside the image read as zero.
Tensor crop_resize(const Tensor& image, double x0, double y0, double w, double h,
                   int out_h, int out_w);

struct AlignedFace {
  Tensor image;  // out_h x out_w x C
  SimilarityTransform transform;  // source pixel -> template pixel
};

/// Registers a frame to the template using the eye centers and nose tip.
/// Roll is removed; yaw and pitch are untouched. Landmarks must be ibug-68.
AlignedFace align_face(const Tensor& frame, const Tensor& landmarks,
                       const FaceTemplate& face_template);

/// Maps an L×2 landmark array through a similarity transform.
Tensor transform_landmarks(const Tensor& landmarks, const SimilarityTransform& t);

enum class RoiKind {
  kMouthFixedBox,
  kMouthCentered,
  kFaceAligned,
  kFaceDirect,
  kUpperFace,
  kCheeks,
};

std::string to_string(RoiKind k);
RoiKind roi_kind_from_string(const std::string& s);

/// Declarative crop description. Geometry parameters are kind-specific:
/// cheeks use strip_height, mouth_centered uses box_size, the fixed-box
/// kinds use box = {x0, y0, w, h}.
struct RoISpec {
  RoiKind kind = RoiKind::kFaceAligned;
  int out_h = 112;
  int out_w = 112;
  double strip_height = 40.0;           // cheeks (40 word-level, 36 sentence-level)
  double box_size = 48.0;               // mouth_centered square side
  std::array<double, 4> box{0, 0, 0, 0};  // mouth_fixed_box / face_direct

  nlohmann::json to_json() const;
  static RoISpec from_json(const nlohmann::json& j);
};

/// Geometry of the source rectangle a spec selects on the given image, before
/// resizing to out_size. Exposed so pipelines can log it in sidecars.
struct CropWindow {
  double x0, y0, w, h;
};
CropWindow roi_window(const Tensor& image, const Tensor& landmarks, const RoISpec& spec);

/// Cuts the spec's region out of an aligned (or raw, for the fixed-box
/// kinds) face and resizes it to spec.out_size. Out-of-frame parts are
/// zero-filled; a crop with no overlap at all throws RegionOutOfFrame.
Tensor crop_roi(const Tensor& image, const Tensor& landmarks, const RoISpec& spec);

}  // namespace facevsr::geometry

#endif  // FACEVSR_GEOMETRY_HPP_
