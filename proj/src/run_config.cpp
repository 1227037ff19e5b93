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

#include "facevsr/run_config.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "facevsr/errors.hpp"
#include "facevsr/models.hpp"

namespace facevsr::cli {

std::string RunConfig::hash() const { return models::stable_hash(doc.dump()); }

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open config: " + path);
  RunConfig cfg;
  try {
    f >> cfg.doc;
  } catch (const nlohmann::json::exception& ex) {
    throw InvalidArgument(std::string("config parse error: ") + ex.what());
  }
  return cfg;
}

void RunConfig::save(const std::string& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write config: " + path);
  f << doc.dump(2) << "\n";
}

std::string shard_cache_root(const std::string& out_dir) {
  if (const char* env = std::getenv("FACEVSR_CACHE"); env && *env) return env;
  return (std::filesystem::path(out_dir) / "shards").string();
}

}  // namespace facevsr::cli
