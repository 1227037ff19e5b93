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

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "facevsr/manifest.hpp"
#include "facevsr/png_io.hpp"
#include "facevsr/rng.hpp"
#include "facevsr/synthetic.hpp"
#include "oracles.hpp"

using namespace facevsr;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
  const fs::path p = fs::temp_directory_path() / ("facevsr_data_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write_lines(const fs::path& p, const std::vector<std::string>& lines) {
  std::ofstream f(p);
  for (const auto& l : lines) f << l << "\n";
}

// Recursive byte-level digest of a directory tree.
uint64_t tree_digest(const fs::path& root) {
  std::vector<fs::path> files;
  for (const auto& de : fs::recursive_directory_iterator(root))
    if (de.is_regular_file()) files.push_back(de.path());
  std::sort(files.begin(), files.end());
  uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](const char* data, size_t n) {
    for (size_t i = 0; i < n; ++i) {
      h ^= static_cast<unsigned char>(data[i]);
      h *= 1099511628211ULL;
    }
  };
  for (const auto& f : files) {
    const std::string rel = fs::relative(f, root).string();
    mix(rel.data(), rel.size());
    std::ifstream in(f, std::ios::binary);
    std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    mix(blob.data(), blob.size());
  }
  return h;
}

}  // namespace

TEST_CASE("manifest: three valid lines parse") {
  const auto dir = temp_dir("manifest_ok");
  write_lines(dir / "m.jsonl",
              {R"({"clip_id":"a","frames_path":"x","landmarks_path":"y","label":"bin","split":"train","duration_frames":10})",
               R"({"clip_id":"b","frames_path":"x","landmarks_path":"y","label":"lay","split":"val","duration_frames":10})",
               R"({"clip_id":"c","frames_path":"x","landmarks_path":"y","transcript":"bin lay","split":"test","duration_frames":12,"yaw_deg":15.5})"});
  const auto m = data::load_manifest((dir / "m.jsonl").string());
  REQUIRE(m.entries.size() == 3);
  CHECK(m.entries[0].label.value() == "bin");
  CHECK(m.entries[2].transcript.value() == "bin lay");
  CHECK(m.entries[2].yaw_deg.value() == doctest::Approx(15.5));
  CHECK(m.split_entries(data::Split::kVal).size() == 1);
}

TEST_CASE("manifest: schema violations") {
  const auto dir = temp_dir("manifest_bad");

  SUBCASE("both label and transcript") {
    write_lines(dir / "m.jsonl",
                {R"({"clip_id":"a","frames_path":"x","landmarks_path":"y","label":"bin","transcript":"bin","split":"train","duration_frames":10})"});
    CHECK_THROWS_AS(data::load_manifest((dir / "m.jsonl").string()),
                    MissingLabelAndTranscript);
  }
  SUBCASE("neither label nor transcript") {
    write_lines(dir / "m.jsonl",
                {R"({"clip_id":"a","frames_path":"x","landmarks_path":"y","split":"train","duration_frames":10})"});
    CHECK_THROWS_AS(data::load_manifest((dir / "m.jsonl").string()),
                    MissingLabelAndTranscript);
  }
  SUBCASE("duplicate clip ids") {
    write_lines(dir / "m.jsonl",
                {R"({"clip_id":"a","frames_path":"x","landmarks_path":"y","label":"b","split":"train","duration_frames":10})",
                 R"({"clip_id":"a","frames_path":"x","landmarks_path":"y","label":"b","split":"train","duration_frames":10})"});
    CHECK_THROWS_AS(data::load_manifest((dir / "m.jsonl").string()), DuplicateClipId);
  }
  SUBCASE("malformed line reports its number") {
    write_lines(dir / "m.jsonl",
                {R"({"clip_id":"a","frames_path":"x","landmarks_path":"y","label":"b","split":"train","duration_frames":10})",
                 R"(not json)"});
    try {
      data::load_manifest((dir / "m.jsonl").string());
      FAIL("expected MalformedEntry");
    } catch (const MalformedEntry& e) {
      CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
  }
  SUBCASE("bad split value") {
    write_lines(dir / "m.jsonl",
                {R"({"clip_id":"a","frames_path":"x","landmarks_path":"y","label":"b","split":"dev","duration_frames":10})"});
    CHECK_THROWS_AS(data::load_manifest((dir / "m.jsonl").string()), MalformedEntry);
  }
}

TEST_CASE("manifest: large write/read round-trip is bit-identical") {
  const auto dir = temp_dir("manifest_rt");
  data::Manifest m;
  Rng rng(11);
  for (int i = 0; i < 10000; ++i) {
    data::ManifestEntry e;
    e.clip_id = "clip_" + std::to_string(i);
    e.frames_path = "frames/" + std::to_string(i);
    e.landmarks_path = "lms/" + std::to_string(i) + ".json";
    if (i % 3 == 0)
      e.transcript = "bin blue at " + std::to_string(i % 7);
    else
      e.label = "w" + std::to_string(i % 50);
    e.split = i % 5 == 0 ? data::Split::kTest : (i % 5 == 1 ? data::Split::kVal : data::Split::kTrain);
    if (i % 2 == 0) e.yaw_deg = std::floor(rng.uniform(0, 70) * 1024) / 1024;
    e.duration_frames = 8 + i % 40;
    m.entries.push_back(std::move(e));
  }
  data::save_manifest(m, (dir / "a.jsonl").string());
  const auto loaded = data::load_manifest((dir / "a.jsonl").string());
  data::save_manifest(loaded, (dir / "b.jsonl").string());

  std::ifstream fa(dir / "a.jsonl", std::ios::binary), fb(dir / "b.jsonl", std::ios::binary);
  std::string a((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
  std::string b((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
  REQUIRE(!a.empty());
  CHECK(a == b);
}

TEST_CASE("png io: round trip and scaling") {
  const auto dir = temp_dir("png");
  Tensor img({5, 7, 1});
  for (int64_t i = 0; i < img.numel(); ++i) img[i] = static_cast<double>(i) / (img.numel() - 1);
  img[3] = 1.0;  // ensure max hits 255 exactly
  write_png((dir / "g.png").string(), img);
  const Tensor back = read_png((dir / "g.png").string());
  REQUIRE(back.shape() == img.shape());
  CHECK(back.max() == doctest::Approx(1.0));  // 8-bit 255 maps to exactly 1.0
  for (int64_t i = 0; i < img.numel(); ++i)
    CHECK(back[i] == doctest::Approx(img[i]).epsilon(0.5 / 255));
  CHECK_THROWS_AS(read_png((dir / "missing.png").string()), UnreadableFrame);
}

TEST_CASE("load_clip: frame count propagation and mismatches") {
  const auto dir = temp_dir("clip");
  data::SyntheticSpec spec;
  spec.num_classes = 2;
  spec.clips_per_class = 3;
  spec.frames = 29;
  spec.seed = 5;
  const auto ds = data::generate_synthetic(spec, (dir / "corpus").string());
  const auto& entry = ds.manifest.entries.front();

  auto [clip, track] = data::load_clip(entry);
  CHECK(clip.pixels.dim(0) == 29);
  CHECK(track.frames() == 29);
  CHECK(clip.pixels.min() >= 0.0);
  CHECK(clip.pixels.max() <= 1.0);
  CHECK(clip.pixels.dim(3) == 1);

  // drop one landmark row -> FrameCountMismatch
  data::LandmarkTrack broken = track;
  Tensor fewer({28, track.landmark_count(), 2});
  std::copy(track.points.data(), track.points.data() + fewer.numel(), fewer.data());
  broken.points = fewer;
  broken.confidence.resize(28);
  data::save_landmarks(broken, entry.resolved_landmarks_path());
  CHECK_THROWS_AS(data::load_clip(entry), FrameCountMismatch);
}

TEST_CASE("synthetic: identical seeds give byte-identical corpora") {
  const auto dir = temp_dir("synth_det");
  data::SyntheticSpec spec;
  spec.num_classes = 3;
  spec.clips_per_class = 4;
  spec.frames = 6;
  spec.seed = 7;
  data::generate_synthetic(spec, (dir / "a").string());
  data::generate_synthetic(spec, (dir / "b").string());
  CHECK(tree_digest(dir / "a") == tree_digest(dir / "b"));

  data::SyntheticSpec other = spec;
  other.seed = 8;
  data::generate_synthetic(other, (dir / "c").string());
  CHECK(tree_digest(dir / "a") != tree_digest(dir / "c"));
}

TEST_CASE("synthetic: balance contract 8 classes x 40 clips") {
  const auto dir = temp_dir("synth_balance");
  data::SyntheticSpec spec;
  spec.num_classes = 8;
  spec.clips_per_class = 40;
  spec.frames = 4;
  spec.seed = 1;
  const auto ds = data::generate_synthetic(spec, (dir / "corpus").string());
  REQUIRE(ds.manifest.entries.size() == 320);

  std::map<std::pair<std::string, std::string>, int> counts;
  for (const auto& e : ds.manifest.entries)
    ++counts[{data::to_string(e.split), e.label.value()}];
  for (const auto& split : {"train", "val", "test"}) {
    std::set<int> per_class;
    for (const auto& name : ds.class_names)
      per_class.insert(counts[{split, name}]);
    CHECK(per_class.size() == 1);  // same count for every class
  }
}

TEST_CASE("synthetic: parsing is total on generator output") {
  const auto dir = temp_dir("synth_total");
  data::SyntheticSpec spec;
  spec.num_classes = 2;
  spec.clips_per_class = 3;
  spec.frames = 5;
  spec.seed = 3;
  const auto ds = data::generate_synthetic(spec, (dir / "corpus").string());
  const auto m = data::load_manifest(ds.manifest_path);
  REQUIRE(m.entries.size() == ds.manifest.entries.size());
  for (const auto& e : m.entries) {
    auto [clip, track] = data::load_clip(e);
    CHECK(clip.pixels.dim(0) == spec.frames);
    CHECK(track.landmark_count() == 68);
    CHECK(track.scheme == "ibug68");
    CHECK(track.points.all_finite());
  }
}

TEST_CASE("synthetic: occluding the mouth removes all class signal (NN oracle)") {
  const auto dir = temp_dir("synth_mi");
  data::SyntheticSpec spec;
  spec.num_classes = 8;
  spec.clips_per_class = 18;
  spec.frames = 10;
  spec.canvas_h = 40;
  spec.canvas_w = 40;
  spec.cue_regions = {data::CueRegion::kMouth};
  spec.redundancy = false;
  spec.seed = 21;
  const auto ds = data::generate_synthetic(spec, (dir / "corpus").string());
  const auto& box = ds.layout.mouth;

  std::vector<Tensor> train, test;
  std::vector<int> train_labels, test_labels;
  for (const auto& e : ds.manifest.entries) {
    auto [clip, track] = data::load_clip(e);
    Tensor px = clip.pixels;
    const int64_t t = px.dim(0), h = px.dim(1), w = px.dim(2);
    for (int64_t s = 0; s < t; ++s)
      for (int64_t y = std::max<int64_t>(0, (int64_t)box.y0);
           y < std::min<int64_t>(h, (int64_t)(box.y0 + box.h)); ++y)
        for (int64_t x = std::max<int64_t>(0, (int64_t)box.x0);
             x < std::min<int64_t>(w, (int64_t)(box.x0 + box.w)); ++x)
          px.data()[(s * h + y) * w + x] = 0.0;
    const int label = static_cast<int>(
        std::find(ds.class_names.begin(), ds.class_names.end(), e.label.value()) -
        ds.class_names.begin());
    if (e.split == data::Split::kTest) {
      test.push_back(px);
      test_labels.push_back(label);
    } else {
      train.push_back(px);
      train_labels.push_back(label);
    }
  }
  REQUIRE(!test.empty());
  const double acc = oracles::nn_classifier_accuracy(train, train_labels, test, test_labels);
  const double chance = 1.0 / spec.num_classes;
  CHECK(acc <= 2.0 * chance);  // occluded clips carry no class information
}

TEST_CASE("synthetic: mouth-region mean trajectories separate the classes") {
  // companion to the occlusion test, mirroring the simplest classifier the
  // corpus is designed to satisfy: per-frame mean intensity inside the
  // mouth box is already highly discriminative.
  const auto dir = temp_dir("synth_signal");
  data::SyntheticSpec spec;
  spec.num_classes = 4;
  spec.clips_per_class = 18;
  spec.frames = 10;
  spec.canvas_h = 40;
  spec.canvas_w = 40;
  spec.seed = 22;
  const auto ds = data::generate_synthetic(spec, (dir / "corpus").string());
  const auto& box = ds.layout.mouth;

  auto mouth_trajectory = [&](const Tensor& px) {
    const int64_t t = px.dim(0), h = px.dim(1), w = px.dim(2);
    Tensor traj({t});
    for (int64_t s = 0; s < t; ++s) {
      double acc = 0;
      int64_t n = 0;
      for (int64_t y = std::max<int64_t>(0, (int64_t)box.y0);
           y < std::min<int64_t>(h, (int64_t)(box.y0 + box.h)); ++y)
        for (int64_t x = std::max<int64_t>(0, (int64_t)box.x0);
             x < std::min<int64_t>(w, (int64_t)(box.x0 + box.w)); ++x) {
          acc += px.data()[(s * h + y) * w + x];
          ++n;
        }
      traj[s] = acc / static_cast<double>(n);
    }
    return traj;
  };

  std::vector<Tensor> train, test;
  std::vector<int> train_labels, test_labels;
  for (const auto& e : ds.manifest.entries) {
    auto [clip, track] = data::load_clip(e);
    const int label = static_cast<int>(
        std::find(ds.class_names.begin(), ds.class_names.end(), e.label.value()) -
        ds.class_names.begin());
    if (e.split == data::Split::kTest) {
      test.push_back(mouth_trajectory(clip.pixels));
      test_labels.push_back(label);
    } else {
      train.push_back(mouth_trajectory(clip.pixels));
      train_labels.push_back(label);
    }
  }
  const double acc = oracles::nn_classifier_accuracy(train, train_labels, test, test_labels);
  CHECK(acc >= 2.0 / spec.num_classes);
}

TEST_CASE("synthetic: sentence task emits parsable transcripts") {
  const auto dir = temp_dir("synth_sent");
  data::SyntheticSpec spec;
  spec.task = "sentence";
  spec.num_classes = 3;
  spec.sentence_words = 3;
  spec.sentence_clips = 12;
  spec.frames = 12;
  spec.seed = 9;
  const auto ds = data::generate_synthetic(spec, (dir / "corpus").string());
  REQUIRE(ds.manifest.entries.size() == 12);
  for (const auto& e : ds.manifest.entries) {
    REQUIRE(e.transcript.has_value());
    int words = 1;
    for (char c : *e.transcript)
      if (c == ' ') ++words;
    CHECK(words == 3);
  }
}
