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

#include "facevsr/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <vector>

namespace facevsr::models {

namespace {
constexpr char kMagic[8] = {'F', 'V', 'S', 'R', '0', '0', '0', '1'};
}

void Checkpoint::save(const std::string& path_base) const {
  nlohmann::json index = nlohmann::json::array();
  int64_t offset = 0;
  for (const auto& [name, t] : arrays) {
    index.push_back({{"name", name}, {"shape", t.shape()}, {"offset", offset}});
    offset += t.numel();
  }
  const std::string header = index.dump();

  std::ofstream bin(path_base + ".bin", std::ios::binary);
  if (!bin) throw IoError("cannot write " + path_base + ".bin");
  bin.write(kMagic, sizeof(kMagic));
  const uint64_t hlen = header.size();
  bin.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
  bin.write(header.data(), static_cast<std::streamsize>(header.size()));
  for (const auto& [name, t] : arrays)
    bin.write(reinterpret_cast<const char*>(t.data()),
              static_cast<std::streamsize>(t.numel() * sizeof(Scalar)));
  if (!bin) throw IoError("write failed: " + path_base + ".bin");

  nlohmann::json side;
  side["config_hash"] = config_hash;
  side["stage"] = stage;
  side["epoch"] = epoch;
  side["metrics"] = metrics;
  std::ofstream js(path_base + ".json", std::ios::binary);
  if (!js) throw IoError("cannot write " + path_base + ".json");
  js << side.dump(2) << "\n";
}

Checkpoint Checkpoint::load(const std::string& path_base) {
  std::ifstream bin(path_base + ".bin", std::ios::binary);
  if (!bin) throw IoError("cannot open " + path_base + ".bin");
  char magic[8];
  bin.read(magic, sizeof(magic));
  if (!bin || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw IoError("not a checkpoint archive: " + path_base + ".bin");
  uint64_t hlen = 0;
  bin.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
  std::string header(hlen, '\0');
  bin.read(header.data(), static_cast<std::streamsize>(hlen));
  const nlohmann::json index = nlohmann::json::parse(header);

  Checkpoint ckpt;
  for (const auto& entry : index) {
    const auto shape = entry.at("shape").get<std::vector<int64_t>>();
    Tensor t(shape);
    bin.read(reinterpret_cast<char*>(t.data()),
             static_cast<std::streamsize>(t.numel() * sizeof(Scalar)));
    if (!bin) throw IoError("truncated checkpoint: " + path_base + ".bin");
    ckpt.arrays[entry.at("name").get<std::string>()] = std::move(t);
  }

  std::ifstream js(path_base + ".json");
  if (js) {
    nlohmann::json side;
    js >> side;
    ckpt.config_hash = side.value("config_hash", "");
    ckpt.stage = side.value("stage", "");
    ckpt.epoch = side.value("epoch", 0);
    ckpt.metrics = side.value("metrics", nlohmann::json::object());
  }
  return ckpt;
}

}  // namespace facevsr::models
