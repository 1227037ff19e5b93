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

#ifndef FACEVSR_RUN_CONFIG_HPP_
#define FACEVSR_RUN_CONFIG_HPP_

#include <string>

#include <json.hpp>

namespace facevsr::cli {

/// One config = one run = one output directory. The raw document is kept
/// verbatim; its hash is stamped into every artifact the run produces.
struct RunConfig {
  nlohmann::json doc;

  std::string task() const { return doc.value("task", "word"); }
  uint64_t seed() const { return doc.value("seed", uint64_t{0}); }
  std::string hash() const;

  static RunConfig load(const std::string& path);
  void save(const std::string& path) const;
};

/// Shard cache root: FACEVSR_CACHE env var, else <out>/shards.
std::string shard_cache_root(const std::string& out_dir);

}  // namespace facevsr::cli

#endif  // FACEVSR_RUN_CONFIG_HPP_
