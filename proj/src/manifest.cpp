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

#include "facevsr/manifest.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "facevsr/png_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace facevsr::data {

std::string to_string(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "train";
}

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::kTrain;
  if (s == "val") return Split::kVal;
  if (s == "test") return Split::kTest;
  throw MalformedEntry("unknown split '" + s + "'");
}

namespace {
std::string resolve_against(const std::string& base, const std::string& path) {
  if (path.empty() || fs::path(path).is_absolute() || base.empty()) return path;
  return (fs::path(base) / path).string();
}
}  // namespace

std::string ManifestEntry::resolved_frames_path() const {
  return resolve_against(base_dir, frames_path);
}

std::string ManifestEntry::resolved_landmarks_path() const {
  return resolve_against(base_dir, landmarks_path);
}

std::vector<const ManifestEntry*> Manifest::split_entries(Split s) const {
  std::vector<const ManifestEntry*> out;
  for (const auto& e : entries)
    if (e.split == s) out.push_back(&e);
  return out;
}

std::vector<std::string> Manifest::class_names() const {
  std::vector<std::string> names;
  for (const auto& e : entries) {
    if (!e.label) continue;
    if (std::find(names.begin(), names.end(), *e.label) == names.end())
      names.push_back(*e.label);
  }
  return names;
}

namespace {

ManifestEntry parse_entry(const json& j, size_t line_no) {
  auto fail = [line_no](const std::string& why) -> MalformedEntry {
    return MalformedEntry("line " + std::to_string(line_no) + ": " + why);
  };
  if (!j.is_object()) throw fail("not a JSON object");

  ManifestEntry e;
  try {
    e.clip_id = j.at("clip_id").get<std::string>();
    e.frames_path = j.at("frames_path").get<std::string>();
    e.landmarks_path = j.at("landmarks_path").get<std::string>();
    e.split = split_from_string(j.at("split").get<std::string>());
    e.duration_frames = j.at("duration_frames").get<int64_t>();
  } catch (const json::exception& ex) {
    throw fail(ex.what());
  }
  if (e.duration_frames <= 0) throw fail("duration_frames must be positive");

  const bool has_label = j.contains("label");
  const bool has_transcript = j.contains("transcript");
  if (has_label == has_transcript)
    throw MissingLabelAndTranscript(
        "line " + std::to_string(line_no) + ": entry '" + e.clip_id +
        "' must carry exactly one of label / transcript");
  if (has_label) e.label = j.at("label").get<std::string>();
  if (has_transcript) e.transcript = j.at("transcript").get<std::string>();
  if (j.contains("yaw_deg")) e.yaw_deg = j.at("yaw_deg").get<double>();
  return e;
}

}  // namespace

Manifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest: " + path);

  Manifest m;
  std::set<std::string> seen;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& ex) {
      throw MalformedEntry("line " + std::to_string(line_no) + ": " + ex.what());
    }
    ManifestEntry e = parse_entry(j, line_no);
    e.base_dir = fs::path(path).parent_path().string();
    if (!seen.insert(e.clip_id).second)
      throw DuplicateClipId("clip_id '" + e.clip_id + "' repeated at line " +
                            std::to_string(line_no));
    m.entries.push_back(std::move(e));
  }
  return m;
}

void save_manifest(const Manifest& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write manifest: " + path);
  for (const auto& e : m.entries) {
    json j = json::object();
    j["clip_id"] = e.clip_id;
    j["frames_path"] = e.frames_path;
    j["landmarks_path"] = e.landmarks_path;
    if (e.label) j["label"] = *e.label;
    if (e.transcript) j["transcript"] = *e.transcript;
    j["split"] = to_string(e.split);
    if (e.yaw_deg) j["yaw_deg"] = *e.yaw_deg;
    j["duration_frames"] = e.duration_frames;
    out << j.dump() << "\n";
  }
}

LandmarkTrack load_landmarks(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open landmark file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& ex) {
    throw MalformedEntry(std::string("landmark file ") + path + ": " + ex.what());
  }

  LandmarkTrack track;
  track.scheme = j.value("scheme", "ibug68");
  const auto& pts = j.at("points");
  const int64_t t_count = static_cast<int64_t>(pts.size());
  if (t_count == 0) throw MalformedEntry("landmark file has no frames: " + path);
  const int64_t l_count = static_cast<int64_t>(pts.at(0).size());

  track.points = Tensor({t_count, l_count, 2});
  for (int64_t t = 0; t < t_count; ++t) {
    const auto& frame = pts.at(static_cast<size_t>(t));
    if (static_cast<int64_t>(frame.size()) != l_count)
      throw MalformedEntry("landmark count varies across frames in " + path);
    for (int64_t l = 0; l < l_count; ++l) {
      track.points.at({t, l, 0}) = frame.at(static_cast<size_t>(l)).at(0).get<double>();
      track.points.at({t, l, 1}) = frame.at(static_cast<size_t>(l)).at(1).get<double>();
    }
  }
  if (!track.points.all_finite())
    throw MalformedEntry("non-finite landmark coordinate in " + path);

  if (j.contains("confidence"))
    track.confidence = j.at("confidence").get<std::vector<double>>();
  else
    track.confidence.assign(static_cast<size_t>(t_count), 1.0);
  if (static_cast<int64_t>(track.confidence.size()) != t_count)
    throw MalformedEntry("confidence length mismatch in " + path);
  return track;
}

void save_landmarks(const LandmarkTrack& track, const std::string& path) {
  json pts = json::array();
  for (int64_t t = 0; t < track.frames(); ++t) {
    json frame = json::array();
    for (int64_t l = 0; l < track.landmark_count(); ++l)
      frame.push_back({track.points.at({t, l, 0}), track.points.at({t, l, 1})});
    pts.push_back(std::move(frame));
  }
  json j;
  j["scheme"] = track.scheme;
  j["points"] = std::move(pts);
  j["confidence"] = track.confidence;

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write landmark file: " + path);
  out << j.dump() << "\n";
}

std::pair<VideoClip, LandmarkTrack> load_clip(const ManifestEntry& entry) {
  const std::string frames_dir = entry.resolved_frames_path();
  if (!fs::is_directory(frames_dir))
    throw UnreadableFrame("frames_path is not a directory: " + frames_dir);

  std::vector<fs::path> frame_files;
  for (const auto& de : fs::directory_iterator(frames_dir))
    if (de.path().extension() == ".png") frame_files.push_back(de.path());
  std::sort(frame_files.begin(), frame_files.end());

  LandmarkTrack track = load_landmarks(entry.resolved_landmarks_path());

  const int64_t t_count = static_cast<int64_t>(frame_files.size());
  if (t_count == 0) throw UnreadableFrame("no frames under " + entry.frames_path);
  if (t_count != track.frames())
    throw FrameCountMismatch(entry.clip_id + ": " + std::to_string(t_count) +
                             " frames vs " + std::to_string(track.frames()) +
                             " landmark rows");
  if (entry.duration_frames != t_count)
    throw FrameCountMismatch(entry.clip_id + ": manifest says " +
                             std::to_string(entry.duration_frames) + ", found " +
                             std::to_string(t_count));

  Tensor first = read_png(frame_files[0].string());
  const int64_t h = first.dim(0), w = first.dim(1), c = first.dim(2);
  Tensor pixels({t_count, h, w, c});
  for (int64_t t = 0; t < t_count; ++t) {
    Tensor frame = t == 0 ? std::move(first) : read_png(frame_files[static_cast<size_t>(t)].string());
    if (frame.dim(0) != h || frame.dim(1) != w || frame.dim(2) != c)
      throw UnreadableFrame(entry.clip_id + ": frame size varies within clip");
    std::copy(frame.data(), frame.data() + frame.numel(),
              pixels.data() + t * h * w * c);
  }

  VideoClip clip;
  clip.pixels = std::move(pixels);
  clip.meta = entry;
  return {std::move(clip), std::move(track)};
}

}  // namespace facevsr::data
