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
//
// End-to-end checks of the facevsr binary. The binary path comes from the
// FACEVSR_BIN environment variable (set by ctest).

#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "facevsr/checkpoint.hpp"
#include "facevsr/dataset.hpp"
#include "test_util.hpp"

using namespace facevsr;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string binary() {
  if (const char* env = std::getenv("FACEVSR_BIN"); env && *env) return env;
  return "build/tools/facevsr";
}

int run_cli(const std::string& args, std::string* out = nullptr) {
  const auto tmp = fs::temp_directory_path() / "facevsr_cli_out.txt";
  const std::string cmd = binary() + " " + args + " > " + tmp.string() + " 2>&1";
  const int rc = std::system(cmd.c_str());
  if (out) {
    std::ifstream f(tmp);
    std::stringstream ss;
    ss << f.rdbuf();
    *out = ss.str();
  }
  return WEXITSTATUS(rc);
}

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

json read_json(const fs::path& p) {
  std::ifstream f(p);
  REQUIRE(f.good());
  json j;
  f >> j;
  return j;
}

}  // namespace

TEST_CASE("synth: identical seeds give identical directory trees") {
  const auto dir = test_util::temp_dir("cli_synth");
  const std::string common =
      "synth --classes 3 --clips-per-class 4 --frames 5 --canvas 36 --seed 7 --out ";
  CHECK(run_cli(common + (dir / "a").string()) == 0);
  CHECK(run_cli(common + (dir / "b").string()) == 0);
  CHECK(tree_digest(dir / "a") == tree_digest(dir / "b"));
}

TEST_CASE("synth: missing --out is a usage error with exit 2") {
  std::string out;
  CHECK(run_cli("synth --classes 3", &out) == 2);
}

TEST_CASE("synth: cue flags map onto the generator spec") {
  const auto dir = test_util::temp_dir("cli_synth_cues");
  CHECK(run_cli("synth --classes 2 --clips-per-class 3 --frames 4 --canvas 36 "
                "--cue mouth --cue cheeks --redundant --seed 1 --out " +
                (dir / "c").string()) == 0);
  const json layout = read_json(dir / "c" / "layout.json");
  const auto regions = layout.at("spec").at("cue_regions").get<std::vector<std::string>>();
  REQUIRE(regions.size() == 2);
  CHECK(regions[0] == "mouth");
  CHECK(regions[1] == "cheeks");
  CHECK(layout.at("spec").at("redundancy").get<bool>());
}

TEST_CASE("prepare: deterministic shards, sizes, and cheek sidecars") {
  const auto dir = test_util::temp_dir("cli_prepare");
  REQUIRE(run_cli("synth --classes 2 --clips-per-class 3 --frames 4 --canvas 48 --seed 3 "
                  "--out " + (dir / "corpus").string()) == 0);
  const std::string manifest = (dir / "corpus" / "manifest.jsonl").string();

  const std::string prep = "prepare --manifest " + manifest +
                           " --roi face_aligned --out-h 24 --out-w 24 --align-h 24 "
                           "--align-w 24 --out ";
  REQUIRE(run_cli(prep + (dir / "s1").string()) == 0);
  REQUIRE(run_cli(prep + (dir / "s2").string()) == 0);
  CHECK(tree_digest(dir / "s1") == tree_digest(dir / "s2"));

  const auto ds = data::PreparedDataset::load((dir / "s1").string());
  REQUIRE(!ds.clips.empty());
  for (const auto& c : ds.clips) {
    CHECK(c.pixels.dim(1) == 24);
    CHECK(c.pixels.dim(2) == 24);
  }

  // word-level cheek crop: sidecar records the 40x112 pre-resize strip
  REQUIRE(run_cli("prepare --manifest " + manifest +
                  " --roi cheeks --out-h 112 --out-w 112 --align-h 112 --align-w 112 "
                  "--strip-height 40 --out " + (dir / "cheeks").string()) == 0);
  const auto shard =
      models::Checkpoint::load((dir / "cheeks" / ds.clips.front().clip_id).string());
  CHECK(shard.metrics.at("pre_resize_window").at("h").get<double>() == 40.0);
  CHECK(shard.metrics.at("pre_resize_window").at("w").get<double>() == 112.0);
}

TEST_CASE("train / eval / transfer / diagnose round trip") {
  const auto dir = test_util::temp_dir("cli_train");
  REQUIRE(run_cli("synth --classes 2 --clips-per-class 6 --frames 5 --canvas 36 --seed 9 "
                  "--out " + (dir / "corpus").string()) == 0);
  REQUIRE(run_cli("prepare --manifest " + (dir / "corpus" / "manifest.jsonl").string() +
                  " --roi face_aligned --out-h 20 --out-w 20 --align-h 20 --align-w 20 "
                  "--out " + (dir / "shards").string()) == 0);

  json cfg;
  cfg["task"] = "word";
  cfg["seed"] = 4;
  cfg["data"]["shards"] = (dir / "shards").string();
  cfg["model"] = {{"type", "word"}, {"vocab_size", 2}, {"input", {20, 20, 1}},
                  {"frontend_channels", 4}, {"resnet_blocks", 1}, {"rnn_hidden", 8},
                  {"rnn_layers", 2}, {"bidirectional", true}};
  cfg["train"]["plan"] = {{"stages", {{{"name", "III"}, {"scope", "full"},
                                       {"lr", {{"init_lr", 1e-3}}},
                                       {"weight_decay", 0.0}, {"max_epochs", 2}}}},
                          {"batch_size", 4}, {"patience", 5}};
  cfg["augment"] = {{"hflip_prob", 0.5}};
  {
    std::ofstream f(dir / "train.json");
    f << cfg.dump(2);
  }

  std::string out;
  REQUIRE(run_cli("train --config " + (dir / "train.json").string() + " --out " +
                  (dir / "run").string(), &out) == 0);
  CHECK(fs::exists(dir / "run" / "config.json"));
  CHECK(fs::exists(dir / "run" / "events.log"));
  CHECK(fs::exists(dir / "run" / "checkpoints" / "stageIII-best.bin"));

  // a run directory is immutable once it holds a config
  std::string err_out;
  CHECK(run_cli("train --config " + (dir / "train.json").string() + " --out " +
                (dir / "run").string(), &err_out) == 1);

  // evaluation
  json ecfg = cfg;
  ecfg["checkpoint"] = (dir / "run" / "checkpoints" / "stageIII-best").string();
  ecfg["split"] = "test";
  ecfg["pose_buckets"] = {{"thresholds", {20.0, 40.0, 60.0}}};
  {
    std::ofstream f(dir / "eval.json");
    f << ecfg.dump(2);
  }
  REQUIRE(run_cli("eval --config " + (dir / "eval.json").string() + " --out " +
                  (dir / "evalrun").string(), &out) == 0);
  const json report = read_json(dir / "evalrun" / "report.json");
  CHECK(report.at("task") == "word");
  CHECK(report.at("accuracy").get<double>() >= 0.0);
  CHECK(report.at("accuracy").get<double>() <= 1.0);
  CHECK(report.contains("pose_bins"));
  CHECK(fs::exists(dir / "evalrun" / "confusion.csv"));

  // transfer with --freeze: frontend arrays stay bitwise equal to the source
  json tcfg = cfg;
  tcfg.erase("train");
  tcfg["transfer"] = {{"source_checkpoint",
                       (dir / "run" / "checkpoints" / "stageIII-best").string()},
                      {"freeze", true}, {"fine_tune_epochs", 1}, {"lr", 1e-3},
                      {"batch_size", 4}};
  {
    std::ofstream f(dir / "transfer.json");
    f << tcfg.dump(2);
  }
  REQUIRE(run_cli("transfer --config " + (dir / "transfer.json").string() + " --freeze "
                  "--out " + (dir / "transferrun").string(), &out) == 0);
  const auto src = models::Checkpoint::load(
      (dir / "run" / "checkpoints" / "stageIII-best").string());
  const auto fin = models::Checkpoint::load(
      (dir / "transferrun" / "checkpoints" / "transfer-final").string());
  size_t frontend_checked = 0;
  for (const auto& [name, t] : fin.arrays) {
    if (name.rfind("frontend.", 0) != 0) continue;
    const auto& s = src.arrays.at(name);
    REQUIRE(t.same_shape(s));
    for (int64_t i = 0; i < t.numel(); ++i) REQUIRE(t[i] == s[i]);
    ++frontend_checked;
  }
  CHECK(frontend_checked > 0);

  // occlusion diagnose: grid dims follow the sliding-window formula
  json dcfg = cfg;
  dcfg.erase("train");
  dcfg["checkpoint"] = (dir / "run" / "checkpoints" / "stageIII-best").string();
  dcfg["diagnose"] = {{"patch", 7}, {"stride", 7}, {"split", "test"}};
  {
    std::ofstream f(dir / "diag.json");
    f << dcfg.dump(2);
  }
  REQUIRE(run_cli("diagnose --config " + (dir / "diag.json").string() + " --mode occlusion "
                  "--out " + (dir / "diagrun").string(), &out) == 0);
  const json hm = read_json(dir / "diagrun" / "diagnostics" / "occlusion" / "heatmap.json");
  const auto& drops = hm.at("drops");
  CHECK(static_cast<int>(drops.size()) == (20 - 7) / 7 + 1);
  CHECK(static_cast<int>(drops.at(0).size()) == (20 - 7) / 7 + 1);
  CHECK(fs::exists(dir / "diagrun" / "diagnostics" / "occlusion" / "heatmap.png"));
}
